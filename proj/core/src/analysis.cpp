#include "rootsgd/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <boost/math/distributions/students_t.hpp>

#include "rootsgd/errors.hpp"
#include "rootsgd/parallel.hpp"

namespace rootsgd {

HessianNoiseModel HessianNoiseModel::from_constants(const ProblemConstants& c) {
  const std::size_t d = c.dimension;
  if (c.hessian_star.rows() != d || c.hessian_star.cols() != d ||
      c.noise_cov_star.rows() != d || c.noise_cov_star.cols() != d) {
    throw DimensionMismatch("hessian noise model: H* and Sigma* must be d x d");
  }
  HessianNoiseModel m;
  m.hessian = c.hessian_star;
  m.noise_cov = c.noise_cov_star;
  m.tensor = c.hessian_noise_tensor.empty() ? DenseMatrix(d * d, d * d)
                                            : c.hessian_noise_tensor;
  if (m.tensor.rows() != d * d || m.tensor.cols() != d * d) {
    throw DimensionMismatch("hessian noise model: tensor must be d^2 x d^2");
  }
  m.provenance = c.estimate;
  return m;
}

DenseMatrix apply_hessian_noise(const DenseMatrix& tensor, const DenseMatrix& m) {
  const std::size_t d = m.rows();
  if (!m.is_square() || tensor.rows() != d * d || tensor.cols() != d * d) {
    throw DimensionMismatch("apply_hessian_noise: need d x d input and d^2 x d^2 tensor");
  }
  DenseMatrix out(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t l = 0; l < d; ++l) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j)
        for (std::size_t k = 0; k < d; ++k)
          s += tensor(i * d + k, j * d + l) * m(j, k);
      out(i, l) = s;
    }
  return out;
}

DenseMatrix hessian_noise_operator(const DenseMatrix& tensor, std::size_t d) {
  if (tensor.rows() != d * d || tensor.cols() != d * d) {
    throw DimensionMismatch("hessian_noise_operator: tensor must be d^2 x d^2");
  }
  // vec(E[Xi M Xi])[l*d + i] = sum_jk tensor[i*d + k, j*d + l] vec(M)[k*d + j].
  DenseMatrix op(d * d, d * d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t l = 0; l < d; ++l)
      for (std::size_t j = 0; j < d; ++j)
        for (std::size_t k = 0; k < d; ++k)
          op(l * d + i, k * d + j) = tensor(i * d + k, j * d + l);
  return op;
}

DenseMatrix cramer_rao(const DenseMatrix& hessian, const DenseMatrix& noise_cov) {
  require_symmetric(hessian, "cramer_rao H*");
  require_symmetric(noise_cov, "cramer_rao Sigma*");
  if (hessian.rows() != noise_cov.rows()) {
    throw DimensionMismatch("cramer_rao: H* and Sigma* sizes differ");
  }
  const LuDecomposition lu(hessian);
  const std::size_t d = hessian.rows();
  // X = H^-1 Sigma, then (H^-1 X^T)^T = H^-1 Sigma H^-1 for symmetric H.
  auto solve_columns = [&](const DenseMatrix& rhs) {
    DenseMatrix out(d, d);
    Vector col(d);
    for (std::size_t j = 0; j < d; ++j) {
      for (std::size_t i = 0; i < d; ++i) col[i] = rhs(i, j);
      const Vector x = lu.solve(col);
      for (std::size_t i = 0; i < d; ++i) out(i, j) = x[i];
    }
    return out;
  };
  const DenseMatrix x = solve_columns(noise_cov);
  return symmetrized(solve_columns(x.transpose()));
}

namespace {

DenseMatrix flattened_operator(const HessianNoiseModel& model, double eta) {
  const std::size_t d = model.dimension();
  const DenseMatrix eye = DenseMatrix::identity(d);
  const DenseMatrix& h = model.hessian;
  DenseMatrix op = kron(h, eye) + kron(eye, h);
  op -= eta * hessian_noise_operator(model.tensor, d);
  op -= eta * kron(h, h);
  return op;
}

void check_model(const HessianNoiseModel& model, double eta, const char* what) {
  if (!(eta > 0.0) || !std::isfinite(eta)) {
    throw InvalidArgument(std::string(what) + ": eta must be positive");
  }
  const std::size_t d = model.dimension();
  if (d == 0 || !model.hessian.is_square() || model.noise_cov.rows() != d ||
      model.noise_cov.cols() != d || model.tensor.rows() != d * d ||
      model.tensor.cols() != d * d) {
    throw DimensionMismatch(std::string(what) + ": inconsistent model dimensions");
  }
  require_symmetric(model.hessian, "hessian noise model H*");
  require_symmetric(model.noise_cov, "hessian noise model Sigma*");
}

DenseMatrix solve_flattened(const HessianNoiseModel& model, double eta,
                            double rhs_scale, const char* what) {
  const std::size_t d = model.dimension();
  Vector rhs = vec(model.noise_cov);
  for (double& r : rhs) r *= rhs_scale;
  Vector x;
  try {
    x = solve_dense(flattened_operator(model, eta), rhs);
  } catch (const SingularMatrix&) {
    throw SingularOperator(std::string(what) + ": flattened operator is singular at eta = " +
                           std::to_string(eta));
  }
  const DenseMatrix sol = unvec(x, d, d);
  const double scale = 1.0 + sol.max_abs();
  if (asymmetry(sol) > 1e-10 * scale) {
    throw SingularOperator(std::string(what) + ": solution is not symmetric");
  }
  return symmetrized(sol);
}

}  // namespace

double lambda_residual(const HessianNoiseModel& model, double eta,
                       const DenseMatrix& lambda) {
  const DenseMatrix& h = model.hessian;
  DenseMatrix r = lambda * h + h * lambda;
  r -= eta * apply_hessian_noise(model.tensor, lambda);
  r -= eta * (h * lambda * h);
  r -= eta * model.noise_cov;
  const double denom = eta * frobenius_norm(model.noise_cov);
  const double num = frobenius_norm(r);
  return denom > 0.0 ? num / denom : num;
}

DenseMatrix solve_lambda(const HessianNoiseModel& model, double eta) {
  check_model(model, eta, "solve_lambda");
  const DenseMatrix lambda = solve_flattened(model, eta, eta, "solve_lambda");
  const double res = lambda_residual(model, eta, lambda);
  if (!(res <= 1e-10)) {
    throw SingularOperator("solve_lambda: residual " + std::to_string(res) +
                           " exceeds 1e-10 at eta = " + std::to_string(eta));
  }
  return lambda;
}

DenseMatrix stationary_q(const HessianNoiseModel& model, double eta) {
  check_model(model, eta, "stationary_q");
  const DenseMatrix q = solve_flattened(model, eta, 1.0 / eta, "stationary_q");
  const DenseMatrix& h = model.hessian;
  DenseMatrix r = h * q + q * h;
  r -= eta * (h * q * h + apply_hessian_noise(model.tensor, q));
  r -= (1.0 / eta) * model.noise_cov;
  const double denom = frobenius_norm(model.noise_cov) / eta;
  const double res = denom > 0.0 ? frobenius_norm(r) / denom : frobenius_norm(r);
  if (!(res <= 1e-10)) {
    throw SingularOperator("stationary_q: residual " + std::to_string(res) +
                           " exceeds 1e-10 at eta = " + std::to_string(eta));
  }
  return q;
}

DenseMatrix correction_matrix(const HessianNoiseModel& model,
                              const DenseMatrix& lambda) {
  return cramer_rao(model.hessian,
                    symmetrized(apply_hessian_noise(model.tensor, lambda)));
}

EmpiricalCovariance empirical_covariance(const std::vector<Vector>& rows) {
  const std::size_t n = rows.size();
  if (n < 2) {
    throw InsufficientData("empirical_covariance: need at least 2 replicates, got " +
                           std::to_string(n));
  }
  const std::size_t d = rows.front().size();
  for (const Vector& r : rows) {
    if (r.size() != d) throw DimensionMismatch("empirical_covariance: ragged rows");
  }
  Vector mean(d, 0.0);
  for (const Vector& r : rows)
    for (std::size_t i = 0; i < d; ++i) mean[i] += r[i];
  for (double& m : mean) m /= static_cast<double>(n);

  EmpiricalCovariance out;
  out.replicates = n;
  out.covariance = DenseMatrix(d, d);
  out.standard_errors = DenseMatrix(d, d);
  const double nd = static_cast<double>(n);
  std::vector<double> u(n);
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = a; b < d; ++b) {
      double sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        u[i] = (rows[i][a] - mean[a]) * (rows[i][b] - mean[b]);
        sum += u[i];
      }
      const double cov = sum / (nd - 1.0);
      double se = std::numeric_limits<double>::infinity();
      if (n >= 3) {
        // Leave-one-out covariances differ from their mean by
        // -n/((n-1)(n-2)) (u_i - u_bar).
        const double ubar = sum / nd;
        double ss = 0.0;
        for (double ui : u) ss += (ui - ubar) * (ui - ubar);
        const double f = nd / ((nd - 1.0) * (nd - 2.0));
        se = std::sqrt((nd - 1.0) / nd * f * f * ss);
      }
      out.covariance(a, b) = out.covariance(b, a) = cov;
      out.standard_errors(a, b) = out.standard_errors(b, a) = se;
    }
  return out;
}

CovarianceComparison compare_covariance(const EmpiricalCovariance& empirical,
                                        const DenseMatrix& predicted,
                                        double se_multiplier,
                                        double frobenius_tolerance) {
  const DenseMatrix& e = empirical.covariance;
  if (e.rows() != predicted.rows() || e.cols() != predicted.cols()) {
    throw DimensionMismatch("compare_covariance: size mismatch");
  }
  CovarianceComparison c;
  const double pn = frobenius_norm(predicted);
  const double gap = frobenius_distance(e, predicted);
  c.frobenius_relative_gap = pn > 0.0 ? gap / pn : gap;
  for (std::size_t i = 0; i < e.rows(); ++i)
    for (std::size_t j = 0; j < e.cols(); ++j) {
      const double diff = std::abs(e(i, j) - predicted(i, j));
      const double se = empirical.standard_errors(i, j);
      const double z = diff == 0.0 ? 0.0 : (se > 0.0 ? diff / se
                                                     : std::numeric_limits<double>::infinity());
      c.max_standard_errors = std::max(c.max_standard_errors, z);
    }
  c.within_standard_errors = c.max_standard_errors <= se_multiplier;
  c.within_frobenius = c.frobenius_relative_gap <= frobenius_tolerance;
  c.matches = c.within_standard_errors || c.within_frobenius;
  return c;
}

CovarianceReport make_covariance_report(const HessianNoiseModel& model,
                                        double eta,
                                        std::optional<EmpiricalCovariance> empirical) {
  CovarianceReport r;
  r.eta = eta;
  r.cramer_rao = cramer_rao(model.hessian, model.noise_cov);
  r.lambda_eta = solve_lambda(model, eta);
  r.correction = correction_matrix(model, r.lambda_eta);
  r.predicted_total = r.cramer_rao + r.correction;
  if (empirical) {
    r.comparison = compare_covariance(*empirical, r.predicted_total);
    r.empirical = std::move(empirical);
  }
  return r;
}

SlopeFit rate_slope(std::span<const double> ts, std::span<const double> values) {
  if (ts.size() != values.size()) {
    throw DimensionMismatch("rate_slope: ts and values differ in length");
  }
  const std::size_t n = ts.size();
  if (n < 4) {
    throw InsufficientData("rate_slope: need at least 4 points, got " + std::to_string(n));
  }
  const auto [lo, hi] = std::minmax_element(ts.begin(), ts.end());
  if (!(*lo > 0.0) || *hi < 10.0 * *lo) {
    throw InsufficientData("rate_slope: t must be positive and span at least one decade");
  }
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(values[i] > 0.0)) throw InvalidArgument("rate_slope: values must be positive");
    x[i] = std::log(ts[i]);
    y[i] = std::log(values[i]);
  }
  double xm = 0.0, ym = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    xm += x[i];
    ym += y[i];
  }
  xm /= static_cast<double>(n);
  ym /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - xm) * (x[i] - xm);
    sxy += (x[i] - xm) * (y[i] - ym);
  }
  SlopeFit fit;
  fit.points = n;
  fit.slope = sxy / sxx;
  fit.intercept = ym - fit.slope * xm;
  double rss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - fit.intercept - fit.slope * x[i];
    rss += r * r;
  }
  const double dof = static_cast<double>(n - 2);
  const double se = std::sqrt(rss / dof / sxx);
  const boost::math::students_t dist(dof);
  fit.half_width = boost::math::quantile(dist, 0.975) * se;
  return fit;
}

TraceBoundReport correction_trace_bound(const HessianNoiseModel& model,
                                        double eta, double mu,
                                        double noise_lipschitz, double sigma_sq) {
  if (!(mu > 0.0)) throw InvalidArgument("correction_trace_bound: mu must be positive");
  TraceBoundReport r;
  r.trace_actual = correction_matrix(model, solve_lambda(model, eta)).trace();
  r.trace_bound = eta * noise_lipschitz * noise_lipschitz * sigma_sq / (mu * mu * mu);
  r.satisfied = r.trace_actual <= r.trace_bound + 1e-9;
  return r;
}

namespace {

std::vector<std::size_t> sorted_unique(std::span<const std::size_t> probes) {
  std::vector<std::size_t> out(probes.begin(), probes.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

/// y <- y - eta H y + eps for one sample; `scratch` has length d.
void y_update(const Problem& p, const Sample& xi, double eta,
              std::span<const double> theta_star, std::span<const double> pop_star,
              Vector& y, Vector& scratch) {
  const std::size_t d = y.size();
  const DenseMatrix h = p.stochastic_hessian(theta_star, xi);
  p.grad_into(theta_star, xi, scratch);
  Vector hy = matvec(h, y);
  for (std::size_t i = 0; i < d; ++i)
    y[i] = y[i] - eta * hy[i] + (scratch[i] - pop_star[i]);
}

void require_hessian(const Problem& p, const char* what) {
  if (!p.has_hessian()) {
    throw UnsupportedOperation(std::string(what) + ": problem '" +
                               std::string(p.name()) + "' has no stochastic Hessian");
  }
}

}  // namespace

YTrace simulate_y(const Problem& p, double eta, std::size_t T,
                  RandomStream& stream, std::span<const double> start,
                  std::span<const std::size_t> probes, std::size_t skip) {
  require_hessian(p, "simulate_y");
  const std::size_t d = p.dimension();
  if (!start.empty() && start.size() != d) {
    throw DimensionMismatch("simulate_y: start has wrong length");
  }
  if (skip >= T && T > 0) throw InvalidArgument("simulate_y: skip must be below T");
  const Vector& theta_star = p.constants().theta_star;
  const Vector pop_star = p.population_grad(theta_star);
  const std::vector<std::size_t> wanted = sorted_unique(probes);

  YTrace trace;
  Vector y = start.empty() ? Vector(d, 0.0) : Vector(start.begin(), start.end());
  Vector scratch(d);
  std::vector<double> outer(d * d, 0.0);
  Sample xi;
  auto next_probe = wanted.begin();
  for (std::size_t t = 1; t <= T; ++t) {
    p.draw_into(stream, xi);
    y_update(p, xi, eta, theta_star, pop_star, y, scratch);
    if (t > skip) {
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) outer[i * d + j] += y[i] * y[j];
    }
    if (next_probe != wanted.end() && *next_probe == t) {
      trace.probes.push_back(YProbe{t, y});
      ++next_probe;
    }
  }
  const double count = static_cast<double>(T - skip);
  trace.time_average_outer = DenseMatrix(d, d);
  for (std::size_t k = 0; k < d * d; ++k)
    trace.time_average_outer.entries()[k] = T > skip ? outer[k] / count : 0.0;
  trace.final_y = std::move(y);
  return trace;
}

std::vector<double> coupling_gaps(const Problem& p,
                                  std::span<const double> theta0,
                                  const StepPlan& plan,
                                  std::span<const std::size_t> probes,
                                  RandomStream& stream) {
  require_hessian(p, "coupling_diagnostic");
  const std::vector<std::size_t> wanted = sorted_unique(probes);
  if (wanted.empty()) return {};
  if (wanted.front() < plan.burn_in) {
    throw InvalidArgument("coupling_diagnostic: probes must be at or after the burn-in");
  }
  const std::size_t d = p.dimension();
  const Vector& theta_star = p.constants().theta_star;
  const Vector pop_star = p.population_grad(theta_star);

  RootSgdState state = make_state(theta0);
  Vector y(d, 0.0);
  Vector scratch(d);
  Sample xi;
  std::vector<double> gaps;
  gaps.reserve(wanted.size());
  auto next_probe = wanted.begin();
  const std::size_t T = wanted.back();
  for (std::size_t t = 1; t <= T; ++t) {
    p.draw_into(stream, xi);
    if (state.phase == Phase::running) {
      y_update(p, xi, plan.eta, theta_star, pop_star, y, scratch);
    }
    advance(state, xi, p, plan);
    if (t == plan.burn_in) {
      for (std::size_t i = 0; i < d; ++i)
        y[i] = static_cast<double>(plan.burn_in) * state.v[i];
    }
    if (next_probe != wanted.end() && *next_probe == t) {
      double g = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        const double diff = static_cast<double>(t) * state.v[i] - y[i];
        g += diff * diff;
      }
      gaps.push_back(g);
      ++next_probe;
    }
  }
  return gaps;
}

std::vector<CouplingPoint> coupling_diagnostic(
    const Problem& p, std::span<const double> theta0, const StepPlan& plan,
    std::span<const std::size_t> probes, std::size_t replicates,
    std::uint64_t master_seed, unsigned workers) {
  if (replicates < 2) {
    throw InsufficientData("coupling_diagnostic: need at least 2 replicates");
  }
  const std::vector<std::size_t> wanted = sorted_unique(probes);
  const auto per_replicate = parallel_map(replicates, workers, [&](std::size_t r) {
    RandomStream stream(master_seed, r, stream_domain::replicate);
    return coupling_gaps(p, theta0, plan, wanted, stream);
  });
  std::vector<CouplingPoint> out(wanted.size());
  const double n = static_cast<double>(replicates);
  for (std::size_t k = 0; k < wanted.size(); ++k) {
    double sum = 0.0, sq = 0.0;
    for (const auto& g : per_replicate) {
      sum += g[k];
      sq += g[k] * g[k];
    }
    const double mean = sum / n;
    const double var = std::max(0.0, (sq - n * mean * mean) / (n - 1.0));
    out[k] = CouplingPoint{wanted[k], mean, std::sqrt(var / n)};
  }
  return out;
}

}  // namespace rootsgd
