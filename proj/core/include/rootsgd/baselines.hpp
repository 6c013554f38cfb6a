#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "rootsgd/problem.hpp"
#include "rootsgd/random.hpp"

namespace rootsgd {

struct SgdState {
  std::size_t t = 0;
  Vector theta;    // theta-hat_t
  Vector average;  // z-hat: mean of the averaged iterates
  /// Number of iterates folded into `average` (t minus any discarded prefix).
  std::size_t averaged = 0;

  Vector grad;  // scratch
};

SgdState make_sgd_state(std::span<const double> theta0);

/// theta <- theta - eta grad f(theta; xi); t incremented.
void sgd_step(SgdState& state, const Sample& xi, const Problem& p, double eta);

/// z <- (1/n) theta + ((n-1)/n) z, n the count of averaged iterates.
void prj_update(SgdState& state);

/// eta_t = scale for a constant schedule, scale * t^(-alpha) otherwise.
class StepSchedule {
 public:
  static StepSchedule constant(double eta);
  /// Requires alpha in (0.5, 1).
  static StepSchedule polynomial(double scale, double alpha);

  double at(std::size_t t) const;
  double scale() const { return scale_; }
  double alpha() const { return alpha_; }
  bool is_constant() const { return alpha_ == 0.0; }

 private:
  StepSchedule(double scale, double alpha) : scale_(scale), alpha_(alpha) {}
  double scale_;
  double alpha_;
};

struct SgdProbeRecord {
  std::size_t t = 0;
  Vector theta;
  Vector average;
};

struct SgdResult {
  Vector theta;
  Vector average;
  std::size_t samples_consumed = 0;
  std::vector<SgdProbeRecord> probes;
};

/// Runs T SGD steps with PRJ averaging. Iterates 1..discard are left out of
/// the average (discard = 0 averages from the start).
SgdResult run_sgd(const Problem& p, std::span<const double> theta0,
                  const StepSchedule& schedule, std::size_t T,
                  RandomStream& stream, std::size_t discard = 0,
                  std::span<const std::size_t> probes = {});

}  // namespace rootsgd
