#include "rootsgd/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rootsgd/errors.hpp"

namespace rootsgd {

SgdState make_sgd_state(std::span<const double> theta0) {
  SgdState s;
  s.theta.assign(theta0.begin(), theta0.end());
  s.average.assign(theta0.size(), 0.0);
  s.grad.assign(theta0.size(), 0.0);
  return s;
}

void sgd_step(SgdState& state, const Sample& xi, const Problem& p, double eta) {
  const std::size_t d = p.dimension();
  if (state.theta.size() != d) {
    throw DimensionMismatch("sgd_step: state has dimension " +
                            std::to_string(state.theta.size()) +
                            ", problem has " + std::to_string(d));
  }
  if (state.grad.size() != d) state.grad.assign(d, 0.0);
  p.grad_into(state.theta, xi, state.grad);
  for (std::size_t i = 0; i < d; ++i) state.theta[i] -= eta * state.grad[i];
  ++state.t;
}

void prj_update(SgdState& state) {
  if (state.average.size() != state.theta.size()) {
    state.average.assign(state.theta.size(), 0.0);
  }
  const std::size_t n = ++state.averaged;
  const double inv = 1.0 / static_cast<double>(n);
  const double keep = static_cast<double>(n - 1) * inv;
  for (std::size_t i = 0; i < state.theta.size(); ++i)
    state.average[i] = inv * state.theta[i] + keep * state.average[i];
}

StepSchedule StepSchedule::constant(double eta) {
  if (!(eta >= 0.0) || !std::isfinite(eta)) {
    throw InvalidArgument("step schedule: eta must be nonnegative");
  }
  return StepSchedule(eta, 0.0);
}

StepSchedule StepSchedule::polynomial(double scale, double alpha) {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw InvalidArgument("step schedule: scale must be positive");
  }
  if (!(alpha > 0.5 && alpha < 1.0)) {
    throw InvalidArgument("step schedule: alpha must lie in (0.5, 1)");
  }
  return StepSchedule(scale, alpha);
}

double StepSchedule::at(std::size_t t) const {
  if (alpha_ == 0.0) return scale_;
  return scale_ * std::pow(static_cast<double>(std::max<std::size_t>(t, 1)), -alpha_);
}

SgdResult run_sgd(const Problem& p, std::span<const double> theta0,
                  const StepSchedule& schedule, std::size_t T,
                  RandomStream& stream, std::size_t discard,
                  std::span<const std::size_t> probes) {
  if (theta0.size() != p.dimension()) {
    throw DimensionMismatch("run_sgd: theta0 has wrong length");
  }
  if (discard >= T && T > 0) {
    throw InvalidArgument("run_sgd: discard prefix must be shorter than T");
  }
  std::vector<std::size_t> wanted(probes.begin(), probes.end());
  std::sort(wanted.begin(), wanted.end());
  wanted.erase(std::unique(wanted.begin(), wanted.end()), wanted.end());
  for (std::size_t t : wanted) {
    if (t == 0 || t > T) {
      throw InvalidArgument("run_sgd: probe index " + std::to_string(t) +
                            " outside [1, " + std::to_string(T) + "]");
    }
  }

  SgdResult result;
  SgdState state = make_sgd_state(theta0);
  Sample xi;
  auto next_probe = wanted.begin();
  for (std::size_t t = 1; t <= T; ++t) {
    p.draw_into(stream, xi);
    sgd_step(state, xi, p, schedule.at(t));
    if (t > discard) prj_update(state);
    if (next_probe != wanted.end() && *next_probe == t) {
      result.probes.push_back(SgdProbeRecord{t, state.theta, state.average});
      ++next_probe;
    }
  }
  result.theta = std::move(state.theta);
  result.average = std::move(state.average);
  result.samples_consumed = state.t;
  return result;
}

}  // namespace rootsgd
