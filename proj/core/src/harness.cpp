#include "rootsgd/harness.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "rootsgd/baselines.hpp"
#include "rootsgd/parallel.hpp"
#include "rootsgd/problems.hpp"

namespace rootsgd {

namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "problem.name",        "problem.d",
      "problem.spectrum",    "problem.hessian_noise_scale",
      "problem.grad_noise_cov", "problem.design_cov",
      "problem.noise_std",   "problem.theta_star",
      "problem.theta_gen",   "problem.ridge",
      "problem.rotate",      "problem.estimation_samples",
      "problem.seed",        "method.name",
      "method.setting",      "method.eta",
      "method.burn_in",      "method.eta_alpha",
      "method.prj_discard",  "run.T",
      "run.epsilon",         "run.probes",
      "run.replicates",      "run.seed",
      "run.theta0",          "run.strict",
      "run.covariance",      "output.path"};
  return keys;
}

std::optional<double> parse_double(const std::string& s) {
  const std::string t = trim(s);
  if (t.empty()) return std::nullopt;
  std::size_t pos = 0;
  try {
    const double v = std::stod(t, &pos);
    if (pos != t.size() || !std::isfinite(v)) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::optional<std::uint64_t> parse_count(const std::string& s) {
  const std::string t = trim(s);
  if (t.empty() || !std::all_of(t.begin(), t.end(), [](char c) {
        return std::isdigit(static_cast<unsigned char>(c)) || c == '\'' || c == '_';
      })) {
    // Allow scientific notation for whole numbers, e.g. 2e5.
    const auto d = parse_double(t);
    if (!d || *d < 0.0 || std::floor(*d) != *d || *d > 1e18) return std::nullopt;
    return static_cast<std::uint64_t>(*d);
  }
  std::string digits;
  for (char c : t)
    if (std::isdigit(static_cast<unsigned char>(c))) digits.push_back(c);
  try {
    return std::stoull(digits);
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::optional<bool> parse_bool(const std::string& s) {
  const std::string t = lower(trim(s));
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  return std::nullopt;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',' || std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::optional<Vector> parse_vector(const std::string& s) {
  Vector out;
  for (const std::string& item : split_list(s)) {
    const auto v = parse_double(item);
    if (!v) return std::nullopt;
    out.push_back(*v);
  }
  return out;
}

std::optional<IterationSpec> parse_iteration(const std::string& s) {
  std::string t = trim(s);
  IterationSpec spec;
  if (!t.empty() && (t.back() == 'B' || t.back() == 'b')) {
    spec.burn_in_multiple = true;
    t.pop_back();
    if (t.empty()) t = "1";
    const auto v = parse_double(t);
    if (!v || *v <= 0.0) return std::nullopt;
    spec.value = *v;
    return spec;
  }
  const auto c = parse_count(t);
  if (!c) return std::nullopt;
  spec.value = static_cast<double>(*c);
  return spec;
}

DenseMatrix matrix_from_entries(const Vector& entries, std::size_t d,
                                const char* what) {
  if (entries.size() == d) return DenseMatrix::diagonal(entries);
  if (entries.size() == d * d) return DenseMatrix(d, d, entries);
  throw InvalidArgument(std::string(what) + ": expected " + std::to_string(d) +
                        " or " + std::to_string(d * d) + " entries");
}

double sample_se(double sum, double sq, std::size_t n) {
  if (n < 2) return kNaN;
  const double nd = static_cast<double>(n);
  const double mean = sum / nd;
  const double var = std::max(0.0, (sq - nd * mean * mean) / (nd - 1.0));
  return std::sqrt(var / nd);
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << content;
  out.close();
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

}  // namespace

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

ConfigMap ConfigMap::parse(const std::string& text) {
  ConfigMap map;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw InvalidArgument("config line " + std::to_string(lineno) +
                            ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) {
      throw InvalidArgument("config line " + std::to_string(lineno) + ": empty key");
    }
    map.values_[key] = trim(line.substr(eq + 1));
  }
  return map;
}

ConfigMap ConfigMap::load(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot read config '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::optional<std::string> ConfigMap::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

const char* to_string(MethodName method) {
  switch (method) {
    case MethodName::root_sgd: return "root_sgd";
    case MethodName::root_sgd_restart: return "root_sgd_restart";
    case MethodName::sgd: return "sgd";
    case MethodName::prj_sgd: return "prj_sgd";
  }
  return "unknown";
}

std::size_t IterationSpec::resolve(std::size_t burn_in) const {
  if (!burn_in_multiple) return static_cast<std::size_t>(value);
  return static_cast<std::size_t>(std::llround(value * static_cast<double>(burn_in)));
}

std::string IterationSpec::text() const {
  return burn_in_multiple ? format_number(value) + "B"
                          : std::to_string(static_cast<std::size_t>(value));
}

ConfigError::ConfigError(std::vector<ConfigViolation> violations)
    : Error([&] {
        std::string msg = "invalid config:";
        for (const auto& v : violations) msg += "\n  " + v.field + ": " + v.message;
        return msg;
      }()),
      violations_(std::move(violations)) {}

ExperimentConfig parse_experiment_config(const ConfigMap& map,
                                         std::vector<ConfigViolation>& violations) {
  ExperimentConfig cfg;
  auto bad = [&](const std::string& field, const std::string& msg) {
    violations.push_back(ConfigViolation{field, msg});
  };
  for (const auto& [key, value] : map.values()) {
    if (!known_keys().count(key)) bad(key, "unknown key");
  }
  auto number = [&](const std::string& key, auto assign) {
    if (const auto s = map.get(key)) {
      if (const auto v = parse_double(*s)) {
        assign(*v);
      } else {
        bad(key, "expected a number, got '" + *s + "'");
      }
    }
  };
  auto count = [&](const std::string& key, auto assign) {
    if (const auto s = map.get(key)) {
      if (const auto v = parse_count(*s)) {
        assign(*v);
      } else {
        bad(key, "expected a nonnegative integer, got '" + *s + "'");
      }
    }
  };
  auto vector = [&](const std::string& key, Vector& out) {
    if (const auto s = map.get(key)) {
      if (const auto v = parse_vector(*s)) {
        out = *v;
      } else {
        bad(key, "expected a list of numbers, got '" + *s + "'");
      }
    }
  };
  auto flag = [&](const std::string& key, bool& out) {
    if (const auto s = map.get(key)) {
      if (const auto v = parse_bool(*s)) {
        out = *v;
      } else {
        bad(key, "expected true or false, got '" + *s + "'");
      }
    }
  };

  ProblemSpec& p = cfg.problem;
  if (const auto s = map.get("problem.name")) {
    p.name = lower(*s);
    if (p.name != "noisy_quadratic" && p.name != "linear_regression" &&
        p.name != "logistic_regression") {
      bad("problem.name", "unknown problem '" + *s +
                              "' (expected noisy_quadratic, linear_regression or "
                              "logistic_regression)");
    }
  } else {
    bad("problem.name", "missing");
  }
  count("problem.d", [&](std::uint64_t v) { p.d = v; });
  vector("problem.spectrum", p.spectrum);
  number("problem.hessian_noise_scale", [&](double v) { p.hessian_noise_scale = v; });
  vector("problem.grad_noise_cov", p.grad_noise_cov);
  vector("problem.design_cov", p.design_cov);
  number("problem.noise_std", [&](double v) { p.noise_std = v; });
  vector("problem.theta_star", p.theta_star);
  vector("problem.theta_gen", p.theta_gen);
  number("problem.ridge", [&](double v) { p.ridge = v; });
  flag("problem.rotate", p.rotate);
  count("problem.estimation_samples", [&](std::uint64_t v) { p.estimation_samples = v; });
  count("problem.seed", [&](std::uint64_t v) { p.seed = v; });

  if (const auto s = map.get("method.name")) {
    const std::string n = lower(*s);
    if (n == "root_sgd") {
      cfg.method = MethodName::root_sgd;
    } else if (n == "root_sgd_restart") {
      cfg.method = MethodName::root_sgd_restart;
    } else if (n == "sgd") {
      cfg.method = MethodName::sgd;
    } else if (n == "prj_sgd") {
      cfg.method = MethodName::prj_sgd;
    } else {
      bad("method.name", "unknown method '" + *s +
                             "' (expected root_sgd, root_sgd_restart, sgd or prj_sgd)");
    }
  }
  if (const auto s = map.get("method.setting")) {
    const std::string n = lower(*s);
    if (n == "lsn") {
      cfg.setting = Setting::lsn;
    } else if (n == "isc") {
      cfg.setting = Setting::isc;
    } else {
      bad("method.setting", "expected lsn or isc, got '" + *s + "'");
    }
  }
  if (const auto s = map.get("method.eta")) {
    if (lower(trim(*s)) != "max") {
      if (const auto v = parse_double(*s)) {
        cfg.eta = *v;
      } else {
        bad("method.eta", "expected a positive number or 'max', got '" + *s + "'");
      }
    }
  }
  count("method.burn_in", [&](std::uint64_t v) { cfg.burn_in = v; });
  number("method.eta_alpha", [&](double v) { cfg.eta_alpha = v; });
  count("method.prj_discard", [&](std::uint64_t v) { cfg.prj_discard = v; });

  if (const auto s = map.get("run.T")) {
    if (const auto v = parse_iteration(*s)) {
      cfg.horizon = *v;
    } else {
      bad("run.T", "expected a count or a burn-in multiple like '16B', got '" + *s + "'");
    }
  }
  number("run.epsilon", [&](double v) { cfg.epsilon = v; });
  if (const auto s = map.get("run.probes")) {
    for (const std::string& item : split_list(*s)) {
      if (const auto v = parse_iteration(item)) {
        cfg.probes.push_back(*v);
      } else {
        bad("run.probes", "cannot parse probe '" + item + "'");
      }
    }
  }
  count("run.replicates", [&](std::uint64_t v) { cfg.replicates = v; });
  count("run.seed", [&](std::uint64_t v) { cfg.master_seed = v; });
  vector("run.theta0", cfg.theta0);
  flag("run.strict", cfg.strict);
  flag("run.covariance", cfg.covariance);
  if (const auto s = map.get("output.path")) cfg.output_path = *s;
  return cfg;
}

std::shared_ptr<const Problem> build_problem(const ProblemSpec& spec) {
  const std::size_t d = spec.d;
  if (spec.name == "noisy_quadratic") {
    const DenseMatrix cov = spec.grad_noise_cov.empty()
                                ? DenseMatrix::identity(d)
                                : matrix_from_entries(spec.grad_noise_cov, d,
                                                      "problem.grad_noise_cov");
    NoisyQuadraticOptions opts;
    opts.theta_star = spec.theta_star;
    opts.rotate = spec.rotate;
    opts.estimation_samples = spec.estimation_samples;
    return make_noisy_quadratic(d, spec.spectrum, spec.hessian_noise_scale, cov,
                                spec.seed, opts);
  }
  if (spec.name == "linear_regression") {
    const DenseMatrix cov = spec.design_cov.empty()
                                ? DenseMatrix::identity(d)
                                : matrix_from_entries(spec.design_cov, d,
                                                      "problem.design_cov");
    return make_linear_regression(d, cov, spec.noise_std, spec.theta_star);
  }
  if (spec.name == "logistic_regression") {
    const DenseMatrix cov = spec.design_cov.empty()
                                ? DenseMatrix::identity(d)
                                : matrix_from_entries(spec.design_cov, d,
                                                      "problem.design_cov");
    LogisticRegressionOptions opts;
    opts.evaluation_samples = spec.estimation_samples;
    const Vector gen = spec.theta_gen.empty() ? Vector(d, 0.0) : spec.theta_gen;
    return make_logistic_regression(d, cov, gen, spec.ridge, spec.seed, opts);
  }
  throw InvalidArgument("unknown problem '" + spec.name + "'");
}

std::vector<ConfigViolation> validate_config(const ExperimentConfig& cfg,
                                             ResolvedPlan* out,
                                             std::shared_ptr<const Problem> problem) {
  std::vector<ConfigViolation> v;
  auto bad = [&](const std::string& field, const std::string& msg) {
    v.push_back(ConfigViolation{field, msg});
  };
  const bool root = cfg.method == MethodName::root_sgd ||
                    cfg.method == MethodName::root_sgd_restart;

  if (cfg.replicates == 0) bad("run.replicates", "must be at least 1");
  if (cfg.covariance && cfg.replicates < 2) {
    bad("run.replicates", "covariance estimation needs at least 2 replicates");
  }
  if (cfg.covariance && (cfg.method == MethodName::root_sgd_restart ||
                         cfg.method == MethodName::sgd)) {
    bad("run.covariance", "covariance reports are available for root_sgd and prj_sgd");
  }
  if (cfg.problem.d == 0 || cfg.problem.d > 20) bad("problem.d", "must be in [1, 20]");
  if (cfg.eta && !(*cfg.eta > 0.0)) bad("method.eta", "must be positive");
  if (cfg.eta_alpha && root) bad("method.eta_alpha", "only applies to sgd and prj_sgd");
  if (cfg.eta_alpha && !(*cfg.eta_alpha > 0.5 && *cfg.eta_alpha < 1.0)) {
    bad("method.eta_alpha", "must lie in (0.5, 1)");
  }
  if (cfg.burn_in && *cfg.burn_in == 0) bad("method.burn_in", "must be at least 1");
  if (cfg.epsilon && !(*cfg.epsilon > 0.0)) bad("run.epsilon", "must be positive");
  if (cfg.method == MethodName::root_sgd_restart && !cfg.epsilon) {
    bad("run.epsilon", "root_sgd_restart needs a target accuracy");
  }
  if (cfg.method == MethodName::root_sgd_restart && cfg.horizon) {
    bad("run.T", "root_sgd_restart derives its horizon from run.epsilon");
  }
  if (cfg.method == MethodName::root_sgd && !cfg.horizon && !cfg.epsilon) {
    bad("run.T", "missing (give run.T or run.epsilon)");
  }
  if (!root && !cfg.horizon) bad("run.T", "missing");
  if (!root && cfg.horizon && cfg.horizon->burn_in_multiple) {
    bad("run.T", "burn-in multiples only apply to root_sgd");
  }
  if (!cfg.theta0.empty() && cfg.theta0.size() != cfg.problem.d) {
    bad("run.theta0", "expected " + std::to_string(cfg.problem.d) + " entries");
  }
  if (cfg.output_path.empty()) bad("output.path", "missing");
  if (cfg.problem.name.empty()) bad("problem.name", "missing");
  if (!v.empty()) return v;

  try {
    if (!problem) problem = build_problem(cfg.problem);
  } catch (const Error& e) {
    bad("problem", e.what());
    return v;
  }
  if (problem->dimension() != cfg.problem.d) {
    bad("problem.d", "does not match the supplied problem");
    return v;
  }
  const ProblemConstants& c = problem->constants();

  ResolvedPlan plan;
  plan.problem = problem;
  plan.theta0 = cfg.theta0.empty() ? Vector(c.dimension, 0.0) : cfg.theta0;
  plan.g0_sq = norm_sq(problem->population_grad(plan.theta0));

  try {
    plan.eta_max = max_step_size(c, cfg.setting);
  } catch (const MissingConstant& e) {
    plan.eta_max = kNaN;
    if (!cfg.eta) {
      bad("method.eta", std::string("'max' cannot be resolved: ") + e.what());
    } else if (root && cfg.strict) {
      bad("method.setting", e.what());
    }
  }
  if (!v.empty()) return v;
  plan.eta = cfg.eta.value_or(plan.eta_max);

  const bool above = std::isnan(plan.eta_max) || plan.eta > plan.eta_max;
  if (root && cfg.strict && above) {
    bad("method.eta", "eta = " + format_number(plan.eta) + " exceeds eta_max = " +
                          format_number(plan.eta_max) + " for the " +
                          to_string(cfg.setting) + " setting");
  }
  const std::size_t default_burn_in = burn_in_length(c.mu, plan.eta);
  plan.step_plan = make_step_plan(c, cfg.setting, plan.eta, StepMode::free, cfg.burn_in);
  const std::size_t B = plan.step_plan.burn_in;
  if (cfg.strict && cfg.burn_in && *cfg.burn_in < default_burn_in) {
    bad("method.burn_in", "burn-in " + std::to_string(*cfg.burn_in) +
                              " is shorter than ceil(24/(mu eta)) = " +
                              std::to_string(default_burn_in));
  }

  if (cfg.method == MethodName::root_sgd_restart) {
    const double eps_sq = *cfg.epsilon * *cfg.epsilon;
    if (!(plan.g0_sq > 0.0)) {
      bad("run.theta0", "||grad F(theta0)|| is zero; nothing to restart");
      return v;
    }
    plan.schedule = restart_schedule(c, plan.g0_sq, eps_sq, plan.eta);
    plan.horizon = plan.schedule->total_samples();
    if (plan.schedule->loops == 0) {
      bad("run.epsilon", "epsilon >= ||grad F(theta0)||, so the schedule is empty");
    }
    for (std::size_t k = 1; k < plan.schedule->timestamps.size(); ++k) {
      plan.probes.push_back(plan.schedule->timestamps[k]);
    }
  } else if (cfg.horizon) {
    plan.horizon = cfg.horizon->resolve(B);
  } else {
    const double eps_sq = *cfg.epsilon * *cfg.epsilon;
    const double t = sample_complexity(plan.g0_sq, eps_sq, plan.eta, c.mu, c.sigma_star_sq);
    plan.horizon = std::max<std::size_t>(B, static_cast<std::size_t>(std::ceil(t)));
  }
  if (plan.horizon == 0) bad("run.T", "must be at least 1");
  if (root && plan.horizon < B) {
    if (cfg.strict) {
      bad("run.T", "T = " + std::to_string(plan.horizon) +
                       " is shorter than the burn-in length ceil(24/(mu eta)) = " +
                       std::to_string(B));
    } else if (cfg.method == MethodName::root_sgd) {
      bad("run.T", "T = " + std::to_string(plan.horizon) +
                       " is shorter than the burn-in B = " + std::to_string(B));
    }
  }
  if (!root && cfg.prj_discard >= plan.horizon) {
    bad("method.prj_discard", "must be shorter than T");
  }

  if (cfg.method != MethodName::root_sgd_restart) {
    for (const IterationSpec& p : cfg.probes) {
      if (!root && p.burn_in_multiple) {
        bad("run.probes", "burn-in multiples only apply to root_sgd");
        continue;
      }
      const std::size_t t = p.resolve(B);
      if (t == 0 || t > plan.horizon) {
        bad("run.probes", "probe " + p.text() + " resolves to " + std::to_string(t) +
                              ", outside [1, " + std::to_string(plan.horizon) + "]");
      } else {
        plan.probes.push_back(t);
      }
    }
    if (plan.probes.empty()) plan.probes.push_back(plan.horizon);
    std::sort(plan.probes.begin(), plan.probes.end());
    plan.probes.erase(std::unique(plan.probes.begin(), plan.probes.end()),
                      plan.probes.end());
  }

  bool asymptotic_ok = true;
  if (cfg.covariance && cfg.method == MethodName::root_sgd) {
    double limit = 1.0 / (2.0 * c.L);
    if (c.noise_lipschitz && *c.noise_lipschitz > 0.0) {
      limit = std::min(limit, c.mu / (16.0 * *c.noise_lipschitz * *c.noise_lipschitz));
    }
    if (c.hessian_fourth_moment && *c.hessian_fourth_moment > 0.0) {
      limit = std::min(limit, std::cbrt(c.mu) /
                                  (6.0 * std::pow(*c.hessian_fourth_moment, 4.0 / 3.0)));
    }
    const bool constants_known = c.noise_lipschitz && c.hessian_fourth_moment;
    asymptotic_ok = constants_known && plan.eta < limit;
    if (cfg.strict && !constants_known) {
      bad("method.eta", "asymptotic step-size conditions need l_Xi and l'_Xi");
    } else if (cfg.strict && !asymptotic_ok) {
      bad("method.eta", "eta = " + format_number(plan.eta) +
                            " violates the asymptotic condition eta < 1/(2L) ^ "
                            "mu/(16 l_Xi^2) ^ mu^(1/3)/(6 l'_Xi^(4/3)) = " +
                            format_number(limit));
    }
  }
  plan.out_of_theory = root && (above || plan.step_plan.out_of_theory ||
                                plan.horizon < B || !asymptotic_ok);
  if (out) *out = std::move(plan);
  return v;
}

namespace {

struct ProbeRow {
  std::size_t t = 0;
  double grad_norm_sq = 0.0;
  double dist_sq = 0.0;
  double v_norm_sq = kNaN;
  double z_norm_sq = kNaN;
};

struct ReplicateOutcome {
  std::vector<ProbeRow> rows;
  Vector scaled_final;
};

ProbeRow make_row(const Problem& p, std::size_t t, const Vector& theta,
                  const Vector* v, const Vector* z) {
  ProbeRow r;
  r.t = t;
  r.grad_norm_sq = norm_sq(p.population_grad(theta));
  r.dist_sq = distance_sq(theta, p.constants().theta_star);
  if (v) r.v_norm_sq = norm_sq(*v);
  if (z) r.z_norm_sq = norm_sq(*z);
  return r;
}

ReplicateOutcome run_replicate(const ExperimentConfig& cfg, const ResolvedPlan& plan,
                               std::size_t r) {
  const Problem& p = *plan.problem;
  RandomStream stream(cfg.master_seed, r, stream_domain::replicate);
  ReplicateOutcome out;
  Vector final_theta;
  switch (cfg.method) {
    case MethodName::root_sgd: {
      RunResult res = run(p, plan.theta0, plan.step_plan, plan.horizon, stream, plan.probes);
      for (const ProbeRecord& rec : res.probes)
        out.rows.push_back(make_row(p, rec.t, rec.theta, &rec.v, &rec.z));
      final_theta = std::move(res.theta);
      break;
    }
    case MethodName::root_sgd_restart: {
      RestartResult res = run_with_restarts(p, plan.theta0, plan.step_plan,
                                            *plan.schedule, stream);
      for (const ProbeRecord& rec : res.loop_ends)
        out.rows.push_back(make_row(p, rec.t, rec.theta, &rec.v, &rec.z));
      final_theta = std::move(res.theta);
      break;
    }
    case MethodName::sgd:
    case MethodName::prj_sgd: {
      const StepSchedule schedule = cfg.eta_alpha
                                        ? StepSchedule::polynomial(plan.eta, *cfg.eta_alpha)
                                        : StepSchedule::constant(plan.eta);
      const bool averaged = cfg.method == MethodName::prj_sgd;
      SgdResult res = run_sgd(p, plan.theta0, schedule, plan.horizon, stream,
                              averaged ? cfg.prj_discard : 0, plan.probes);
      for (const SgdProbeRecord& rec : res.probes)
        out.rows.push_back(make_row(p, rec.t, averaged ? rec.average : rec.theta,
                                    nullptr, nullptr));
      final_theta = averaged ? std::move(res.average) : std::move(res.theta);
      break;
    }
  }
  const double root_t = std::sqrt(static_cast<double>(plan.horizon));
  out.scaled_final.resize(final_theta.size());
  const Vector& star = p.constants().theta_star;
  for (std::size_t i = 0; i < final_theta.size(); ++i)
    out.scaled_final[i] = root_t * (final_theta[i] - star[i]);
  return out;
}

void append_matrix(std::string& csv, const std::string& name, const DenseMatrix& m) {
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j)
      csv += name + "," + std::to_string(i) + "," + std::to_string(j) + "," +
             format_number(m(i, j)) + "\n";
}

void append_scalar(std::string& csv, const std::string& name, double value) {
  csv += name + ",0,0," + format_number(value) + "\n";
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& options) {
  ExperimentResult result;
  std::vector<ConfigViolation> violations =
      validate_config(cfg, &result.plan, options.problem);
  if (!violations.empty()) throw ConfigError(std::move(violations));
  const ResolvedPlan& plan = result.plan;
  const Problem& p = *plan.problem;
  const ProblemConstants& c = p.constants();

  const std::vector<ReplicateOutcome> outcomes = parallel_map(
      cfg.replicates, options.workers,
      [&](std::size_t r) { return run_replicate(cfg, plan, r); });
  result.samples_consumed = plan.horizon * cfg.replicates;

  // Summaries in probe order, accumulated in replicate order.
  const std::size_t probe_count = outcomes.front().rows.size();
  for (std::size_t k = 0; k < probe_count; ++k) {
    ProbeSummary s;
    s.t = outcomes.front().rows[k].t;
    double sums[4] = {0, 0, 0, 0};
    double sqs[4] = {0, 0, 0, 0};
    for (const ReplicateOutcome& o : outcomes) {
      const ProbeRow& row = o.rows[k];
      const double vals[4] = {row.grad_norm_sq, row.dist_sq, row.v_norm_sq, row.z_norm_sq};
      for (int q = 0; q < 4; ++q) {
        sums[q] += vals[q];
        sqs[q] += vals[q] * vals[q];
      }
    }
    const double n = static_cast<double>(cfg.replicates);
    s.grad_norm_sq_mean = sums[0] / n;
    s.grad_norm_sq_se = sample_se(sums[0], sqs[0], cfg.replicates);
    s.dist_sq_mean = sums[1] / n;
    s.dist_sq_se = sample_se(sums[1], sqs[1], cfg.replicates);
    s.v_norm_sq_mean = sums[2] / n;
    s.v_norm_sq_se = sample_se(sums[2], sqs[2], cfg.replicates);
    s.z_norm_sq_mean = sums[3] / n;
    s.z_norm_sq_se = sample_se(sums[3], sqs[3], cfg.replicates);
    if (cfg.method == MethodName::root_sgd) {
      s.reference = gradient_norm_bound(plan.g0_sq, plan.eta, c.mu, c.sigma_star_sq, s.t);
    } else if (cfg.method == MethodName::root_sgd_restart) {
      s.reference = plan.schedule->targets[k];
    } else {
      s.reference = kNaN;
    }
    result.summary.push_back(s);
  }
  for (const ReplicateOutcome& o : outcomes) result.scaled_final_errors.push_back(o.scaled_final);

  if (cfg.covariance) {
    const HessianNoiseModel model = HessianNoiseModel::from_problem(p);
    EmpiricalCovariance emp = empirical_covariance(result.scaled_final_errors);
    if (cfg.method == MethodName::root_sgd) {
      result.covariance = make_covariance_report(model, plan.eta, std::move(emp));
    } else {
      CovarianceReport r;
      r.eta = kNaN;
      r.cramer_rao = cramer_rao(model.hessian, model.noise_cov);
      r.lambda_eta = DenseMatrix(c.dimension, c.dimension);
      r.correction = DenseMatrix(c.dimension, c.dimension);
      r.predicted_total = r.cramer_rao;
      r.comparison = compare_covariance(emp, r.predicted_total);
      r.empirical = std::move(emp);
      result.covariance = std::move(r);
    }
  }

  // Output files.
  std::error_code ec;
  fs::create_directories(cfg.output_path, ec);
  if (ec) {
    throw Error("cannot create output directory '" + cfg.output_path.string() +
                "': " + ec.message());
  }
  const std::size_t d = c.dimension;

  std::string replicates_csv = "replicate,t,grad_norm_sq,dist_sq,v_norm_sq,z_norm_sq\n";
  for (std::size_t r = 0; r < outcomes.size(); ++r)
    for (const ProbeRow& row : outcomes[r].rows)
      replicates_csv += std::to_string(r) + "," + std::to_string(row.t) + "," +
                        format_number(row.grad_norm_sq) + "," + format_number(row.dist_sq) +
                        "," + format_number(row.v_norm_sq) + "," +
                        format_number(row.z_norm_sq) + "\n";

  std::string summary_csv =
      "t,replicates,grad_norm_sq_mean,grad_norm_sq_se,dist_sq_mean,dist_sq_se,"
      "v_norm_sq_mean,v_norm_sq_se,z_norm_sq_mean,z_norm_sq_se,reference\n";
  for (const ProbeSummary& s : result.summary)
    summary_csv += std::to_string(s.t) + "," + std::to_string(cfg.replicates) + "," +
                   format_number(s.grad_norm_sq_mean) + "," + format_number(s.grad_norm_sq_se) +
                   "," + format_number(s.dist_sq_mean) + "," + format_number(s.dist_sq_se) +
                   "," + format_number(s.v_norm_sq_mean) + "," +
                   format_number(s.v_norm_sq_se) + "," + format_number(s.z_norm_sq_mean) +
                   "," + format_number(s.z_norm_sq_se) + "," + format_number(s.reference) +
                   "\n";

  std::string final_csv = "replicate";
  for (std::size_t i = 0; i < d; ++i) final_csv += ",e" + std::to_string(i);
  final_csv += "\n";
  for (std::size_t r = 0; r < result.scaled_final_errors.size(); ++r) {
    final_csv += std::to_string(r);
    for (double e : result.scaled_final_errors[r]) final_csv += "," + format_number(e);
    final_csv += "\n";
  }

  std::string run_csv = "key,value\n";
  auto kv = [&](const std::string& k, const std::string& val) {
    run_csv += k + "," + val + "\n";
  };
  kv("problem", std::string(p.name()));
  kv("dimension", std::to_string(d));
  kv("method", to_string(cfg.method));
  kv("setting", to_string(cfg.setting));
  kv("eta", format_number(plan.eta));
  kv("eta_max", format_number(plan.eta_max));
  kv("eta_alpha", cfg.eta_alpha ? format_number(*cfg.eta_alpha) : "none");
  kv("burn_in", std::to_string(plan.step_plan.burn_in));
  kv("omega_max", format_number(plan.step_plan.omega_max));
  kv("T", std::to_string(plan.horizon));
  kv("replicates", std::to_string(cfg.replicates));
  kv("master_seed", std::to_string(cfg.master_seed));
  kv("samples_consumed", std::to_string(result.samples_consumed));
  kv("strict", cfg.strict ? "true" : "false");
  kv("out_of_theory", plan.out_of_theory ? "true" : "false");
  kv("g0_sq", format_number(plan.g0_sq));
  kv("mu", format_number(c.mu));
  kv("L", format_number(c.L));
  kv("sigma_star_sq", format_number(c.sigma_star_sq));
  kv("noise_lipschitz", c.noise_lipschitz ? format_number(*c.noise_lipschitz) : "none");
  kv("individual_smoothness",
     c.individual_smoothness ? format_number(*c.individual_smoothness) : "none");
  kv("constants_provenance",
     c.estimate.provenance == Provenance::analytic ? "analytic" : "monte_carlo");
  kv("constants_sample_count", std::to_string(c.estimate.sample_count));
  kv("constants_max_standard_error", format_number(c.estimate.max_standard_error));
  if (plan.schedule) {
    kv("restart_loops", std::to_string(plan.schedule->loops));
    kv("restart_complexity",
       format_number(restart_complexity(plan.g0_sq, *cfg.epsilon * *cfg.epsilon, plan.eta,
                                        c.mu, c.sigma_star_sq)));
  }

  const auto write = [&](const std::string& name, const std::string& content) {
    const fs::path path = cfg.output_path / name;
    write_file(path, content);
    result.files.push_back(path);
  };
  write("replicates.csv", replicates_csv);
  write("summary.csv", summary_csv);
  write("final.csv", final_csv);
  write("run.csv", run_csv);

  if (result.covariance) {
    const CovarianceReport& r = *result.covariance;
    std::string cov_csv = "quantity,row,col,value\n";
    append_scalar(cov_csv, "eta", r.eta);
    append_matrix(cov_csv, "cramer_rao", r.cramer_rao);
    append_matrix(cov_csv, "lambda_eta", r.lambda_eta);
    append_matrix(cov_csv, "correction", r.correction);
    append_matrix(cov_csv, "predicted_total", r.predicted_total);
    append_matrix(cov_csv, "empirical", r.empirical->covariance);
    append_matrix(cov_csv, "empirical_se", r.empirical->standard_errors);
    append_scalar(cov_csv, "replicates", static_cast<double>(r.empirical->replicates));
    append_scalar(cov_csv, "frobenius_relative_gap", r.comparison->frobenius_relative_gap);
    append_scalar(cov_csv, "max_standard_errors", r.comparison->max_standard_errors);
    append_scalar(cov_csv, "matches", r.comparison->matches ? 1.0 : 0.0);
    write("covariance.csv", cov_csv);
  }
  return result;
}

std::string report_results(const fs::path& results_dir) {
  if (!fs::is_directory(results_dir)) {
    throw InvalidArgument("'" + results_dir.string() + "' is not a directory");
  }
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::recursive_directory_iterator(results_dir)) {
    if (entry.is_regular_file() && entry.path().filename() == "run.csv" &&
        fs::exists(entry.path().parent_path() / "summary.csv")) {
      dirs.push_back(entry.path().parent_path());
    }
  }
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) {
    throw InvalidArgument("no run.csv/summary.csv pairs under '" + results_dir.string() + "'");
  }

  auto read_lines = [](const fs::path& path) {
    std::ifstream in(path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
  };
  auto split_csv = [](const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
      if (ch == ',') {
        out.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(ch);
      }
    }
    out.push_back(cur);
    return out;
  };

  std::string table =
      "experiment,problem,method,eta,T,replicates,out_of_theory,t,grad_norm_sq_mean,"
      "grad_norm_sq_se,reference\n";
  for (const fs::path& dir : dirs) {
    std::map<std::string, std::string> run;
    const auto run_lines = read_lines(dir / "run.csv");
    for (std::size_t i = 1; i < run_lines.size(); ++i) {
      const auto cells = split_csv(run_lines[i]);
      if (cells.size() >= 2) run[cells[0]] = cells[1];
    }
    const auto summary_lines = read_lines(dir / "summary.csv");
    std::string name = fs::relative(dir, results_dir).string();
    if (name == ".") name = dir.filename().string();
    for (std::size_t i = 1; i < summary_lines.size(); ++i) {
      const auto cells = split_csv(summary_lines[i]);
      if (cells.size() < 11) continue;
      table += name + "," + run["problem"] + "," + run["method"] + "," + run["eta"] + "," +
               run["T"] + "," + run["replicates"] + "," + run["out_of_theory"] + "," +
               cells[0] + "," + cells[2] + "," + cells[3] + "," + cells[10] + "\n";
    }
  }
  return table;
}

}  // namespace rootsgd
