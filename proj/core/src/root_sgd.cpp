#include "rootsgd/root_sgd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "rootsgd/errors.hpp"

namespace rootsgd {

const char* to_string(Setting setting) {
  return setting == Setting::lsn ? "lsn" : "isc";
}

const char* to_string(Phase phase) {
  return phase == Phase::burn_in ? "burn_in" : "running";
}

double max_step_size(const ProblemConstants& c, Setting setting) {
  if (setting == Setting::isc) {
    if (!c.individual_smoothness) {
      throw MissingConstant("max_step_size: ISC setting needs l_max");
    }
    return 1.0 / (4.0 * *c.individual_smoothness);
  }
  if (!c.noise_lipschitz) {
    throw MissingConstant("max_step_size: LSN setting needs l_Xi");
  }
  const double smooth = 1.0 / (4.0 * c.L);
  const double l2 = *c.noise_lipschitz * *c.noise_lipschitz;
  if (l2 == 0.0) return smooth;
  return std::min(smooth, c.mu / (8.0 * l2));
}

double omega_max(const ProblemConstants& c, Setting setting) {
  if (setting == Setting::isc) {
    if (!c.individual_smoothness) {
      throw MissingConstant("omega_max: ISC setting needs l_max");
    }
    return 2.0 * *c.individual_smoothness / c.mu;
  }
  if (!c.noise_lipschitz) {
    throw MissingConstant("omega_max: LSN setting needs l_Xi");
  }
  return 2.0 * *c.noise_lipschitz * *c.noise_lipschitz / (c.mu * c.mu);
}

std::size_t burn_in_length(double mu, double eta) {
  if (!(mu > 0.0) || !(eta > 0.0)) {
    throw InvalidArgument("burn_in_length: mu and eta must be positive");
  }
  const double b = std::ceil(24.0 / (mu * eta));
  if (b > 1e15) throw InvalidArgument("burn_in_length: mu * eta is too small");
  return std::max<std::size_t>(1, static_cast<std::size_t>(b));
}

StepPlan make_step_plan(const ProblemConstants& c, Setting setting, double eta,
                        StepMode mode, std::optional<std::size_t> burn_in) {
  if (!(eta > 0.0) || !std::isfinite(eta)) {
    throw InvalidArgument("step plan: eta must be positive");
  }
  StepPlan plan;
  plan.eta = eta;
  const std::size_t default_burn_in = burn_in_length(c.mu, eta);
  plan.burn_in = burn_in.value_or(default_burn_in);
  if (plan.burn_in == 0) throw InvalidArgument("step plan: burn-in must be >= 1");

  std::optional<double> ceiling;
  try {
    ceiling = max_step_size(c, setting);
    plan.omega_max = omega_max(c, setting);
  } catch (const MissingConstant&) {
    if (mode == StepMode::strict) throw;
  }
  const bool above = !ceiling || eta > *ceiling;
  if (above && mode == StepMode::strict) {
    throw InvalidArgument("step plan: eta = " + std::to_string(eta) +
                          " exceeds eta_max = " + std::to_string(*ceiling) +
                          " for the " + to_string(setting) + " setting");
  }
  plan.out_of_theory = above || plan.burn_in < default_burn_in;
  return plan;
}

RootSgdState make_state(std::span<const double> theta0) {
  RootSgdState s;
  s.theta.assign(theta0.begin(), theta0.end());
  s.theta_prev = s.theta;
  s.v.assign(theta0.size(), 0.0);
  s.g1.assign(theta0.size(), 0.0);
  s.g2.assign(theta0.size(), 0.0);
  return s;
}

namespace {

void check_state(const RootSgdState& state, const Problem& p, const char* what) {
  const std::size_t d = p.dimension();
  if (state.theta.size() != d || state.theta_prev.size() != d ||
      state.v.size() != d) {
    throw DimensionMismatch(std::string(what) + ": state has dimension " +
                            std::to_string(state.theta.size()) +
                            ", problem has " + std::to_string(d));
  }
}

void ensure_scratch(RootSgdState& state, std::size_t d) {
  if (state.g1.size() != d) state.g1.assign(d, 0.0);
  if (state.g2.size() != d) state.g2.assign(d, 0.0);
}

void take_step(RootSgdState& state, double eta) {
  const std::size_t d = state.theta.size();
  for (std::size_t i = 0; i < d; ++i) {
    state.theta_prev[i] = state.theta[i];
    state.theta[i] -= eta * state.v[i];
  }
}

}  // namespace

void burn_in_step(RootSgdState& state, const Sample& xi, const Problem& p,
                  const StepPlan& plan) {
  if (state.phase != Phase::burn_in || state.loop_counter >= plan.burn_in) {
    throw PhaseViolation("burn_in_step: state is not in burn-in");
  }
  check_state(state, p, "burn_in_step");
  const std::size_t d = p.dimension();
  ensure_scratch(state, d);
  p.grad_into(state.theta, xi, state.g1);
  ++state.t;
  ++state.loop_counter;
  const double inv_s = 1.0 / static_cast<double>(state.loop_counter);
  for (std::size_t i = 0; i < d; ++i) state.v[i] += (state.g1[i] - state.v[i]) * inv_s;
  if (state.loop_counter == plan.burn_in) {
    take_step(state, plan.eta);
    state.phase = Phase::running;
  }
}

void step(RootSgdState& state, const Sample& xi, const Problem& p, double eta) {
  if (state.phase != Phase::running) {
    throw PhaseViolation("step: state is still in burn-in");
  }
  check_state(state, p, "step");
  const std::size_t d = p.dimension();
  ensure_scratch(state, d);
  p.grad_into(state.theta, xi, state.g1);
  p.grad_into(state.theta_prev, xi, state.g2);
  ++state.t;
  const std::size_t s = ++state.loop_counter;
  const double w = static_cast<double>(s - 1) / static_cast<double>(s);
  for (std::size_t i = 0; i < d; ++i)
    state.v[i] = state.g1[i] + w * (state.v[i] - state.g2[i]);
  take_step(state, eta);
}

void step_hybrid_form(RootSgdState& state, const Sample& xi, const Problem& p,
                      double eta) {
  if (state.phase != Phase::running) {
    throw PhaseViolation("step_hybrid_form: state is still in burn-in");
  }
  check_state(state, p, "step_hybrid_form");
  const std::size_t d = p.dimension();
  ensure_scratch(state, d);
  p.grad_into(state.theta, xi, state.g1);
  p.grad_into(state.theta_prev, xi, state.g2);
  ++state.t;
  const std::size_t s = ++state.loop_counter;
  const double inv_s = 1.0 / static_cast<double>(s);
  const double w = static_cast<double>(s - 1) / static_cast<double>(s);
  for (std::size_t i = 0; i < d; ++i)
    state.v[i] = inv_s * state.g1[i] +
                 w * (state.v[i] + state.g1[i] - state.g2[i]);
  take_step(state, eta);
}

void advance(RootSgdState& state, const Sample& xi, const Problem& p,
             const StepPlan& plan) {
  if (state.phase == Phase::burn_in) {
    burn_in_step(state, xi, p, plan);
  } else {
    step(state, xi, p, plan.eta);
  }
}

void restart_loop(RootSgdState& state) {
  state.loop_counter = 0;
  state.phase = Phase::burn_in;
  state.theta_prev = state.theta;
  std::fill(state.v.begin(), state.v.end(), 0.0);
}

namespace {

std::vector<std::size_t> normalized_probes(std::span<const std::size_t> probes,
                                           std::size_t T) {
  std::vector<std::size_t> out(probes.begin(), probes.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  for (std::size_t t : out) {
    if (t == 0 || t > T) {
      throw InvalidArgument("run: probe index " + std::to_string(t) +
                            " outside [1, " + std::to_string(T) + "]");
    }
  }
  return out;
}

ProbeRecord record_probe(const RootSgdState& state, const Problem& p) {
  ProbeRecord r;
  r.t = state.t;
  r.theta = state.theta;
  r.v = state.v;
  r.z = state.v;
  const Vector pop = p.population_grad(state.theta_prev);
  for (std::size_t i = 0; i < r.z.size(); ++i) r.z[i] -= pop[i];
  return r;
}

}  // namespace

RunResult run(const Problem& p, std::span<const double> theta0,
              const StepPlan& plan, std::size_t T, RandomStream& stream,
              std::span<const std::size_t> probes) {
  if (theta0.size() != p.dimension()) {
    throw DimensionMismatch("run: theta0 has length " +
                            std::to_string(theta0.size()) + ", problem has " +
                            std::to_string(p.dimension()));
  }
  if (T < plan.burn_in) {
    throw HorizonTooShort("run: T = " + std::to_string(T) +
                          " is shorter than the burn-in B = " +
                          std::to_string(plan.burn_in));
  }
  const std::vector<std::size_t> wanted = normalized_probes(probes, T);
  RunResult result;
  result.probes.reserve(wanted.size());
  RootSgdState state = make_state(theta0);
  Sample xi;
  auto next_probe = wanted.begin();
  for (std::size_t t = 1; t <= T; ++t) {
    p.draw_into(stream, xi);
    advance(state, xi, p, plan);
    if (next_probe != wanted.end() && *next_probe == t) {
      result.probes.push_back(record_probe(state, p));
      ++next_probe;
    }
  }
  result.theta = std::move(state.theta);
  result.samples_consumed = state.t;
  return result;
}

std::size_t restart_loop_count(double g0_sq, double eps_sq) {
  if (!(g0_sq > 0.0) || !(eps_sq > 0.0)) {
    throw InvalidArgument("restart schedule: G0^2 and eps^2 must be positive");
  }
  const double ratio = g0_sq / eps_sq;
  std::size_t k = 0;
  double power = 1.0;
  while (power < ratio) {
    power *= 2.0;
    ++k;
  }
  return k;
}

RestartSchedule restart_schedule(const ProblemConstants& c, double g0_sq,
                                 double eps_sq, double eta) {
  if (!(eta > 0.0) || !(c.mu > 0.0)) {
    throw InvalidArgument("restart schedule: eta and mu must be positive");
  }
  RestartSchedule sched;
  sched.loops = restart_loop_count(g0_sq, eps_sq);
  sched.initial_target = g0_sq;
  sched.eta = eta;
  sched.timestamps.push_back(0);
  double previous_target = g0_sq;
  const double floor_length = 105.0 / (eta * c.mu);
  for (std::size_t k = 1; k <= sched.loops; ++k) {
    const double length =
        std::ceil(std::max(floor_length, 112.0 * c.sigma_star_sq / previous_target));
    sched.timestamps.push_back(sched.timestamps.back() +
                               static_cast<std::size_t>(length));
    previous_target *= 0.5;
    sched.targets.push_back(previous_target);
  }
  return sched;
}

RestartResult run_with_restarts(const Problem& p, std::span<const double> theta0,
                                const StepPlan& plan,
                                const RestartSchedule& schedule,
                                RandomStream& stream) {
  if (theta0.size() != p.dimension()) {
    throw DimensionMismatch("run_with_restarts: theta0 has wrong length");
  }
  if (schedule.timestamps.empty() || schedule.timestamps.front() != 0 ||
      schedule.timestamps.size() != schedule.loops + 1) {
    throw InvalidArgument("run_with_restarts: malformed schedule");
  }
  RestartResult result;
  RootSgdState state = make_state(theta0);
  Sample xi;
  for (std::size_t k = 1; k <= schedule.loops; ++k) {
    const std::size_t length = schedule.timestamps[k] - schedule.timestamps[k - 1];
    if (length < plan.burn_in) {
      throw HorizonTooShort("run_with_restarts: loop " + std::to_string(k) +
                            " is shorter than the burn-in");
    }
    restart_loop(state);
    for (std::size_t i = 0; i < length; ++i) {
      p.draw_into(stream, xi);
      advance(state, xi, p, plan);
    }
    result.loop_ends.push_back(record_probe(state, p));
  }
  result.theta = std::move(state.theta);
  result.samples_consumed = state.t;
  return result;
}

double gradient_norm_bound(double g0_sq, double eta, double mu, double sigma_sq,
                           std::size_t T) {
  const double tp1 = static_cast<double>(T) + 1.0;
  return 2700.0 * g0_sq / (eta * eta * mu * mu * tp1 * tp1) +
         28.0 * sigma_sq / tp1;
}

double sample_complexity(double g0_sq, double eps_sq, double eta, double mu,
                         double sigma_sq) {
  const double ratio = std::max(std::sqrt(g0_sq / eps_sq), 1.0);
  return std::max(74.0 / (eta * mu) * ratio, 56.0 * sigma_sq / eps_sq);
}

double restart_complexity(double g0_sq, double eps_sq, double eta, double mu,
                          double sigma_sq) {
  const double k = static_cast<double>(restart_loop_count(g0_sq, eps_sq));
  return 105.0 / (eta * mu) * k +
         224.0 * sigma_sq * std::max(1.0 / eps_sq, 1.0 / g0_sq);
}

}  // namespace rootsgd
