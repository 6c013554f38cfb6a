#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "rootsgd/problem.hpp"
#include "rootsgd/random.hpp"

namespace rootsgd {

enum class Setting { lsn, isc };
enum class Phase { burn_in, running };

const char* to_string(Setting setting);
const char* to_string(Phase phase);

/// min(1/(4L), mu/(8 l_Xi^2)) for LSN, 1/(4 l_max) for ISC. Throws
/// MissingConstant when the setting's constant is absent.
double max_step_size(const ProblemConstants& c, Setting setting);
/// 2 l_Xi^2 / mu^2 for LSN, 2 l_max / mu for ISC. Diagnostic only.
double omega_max(const ProblemConstants& c, Setting setting);
/// ceil(24 / (mu eta)).
std::size_t burn_in_length(double mu, double eta);

enum class StepMode { strict, free };

struct StepPlan {
  double eta = 0.0;
  std::size_t burn_in = 1;
  /// Read-only diagnostic; not used by the algorithm.
  double omega_max = 0.0;
  /// True when eta exceeds the setting's ceiling (only possible in free mode)
  /// or the burn-in was overridden below ceil(24 / (mu eta)).
  bool out_of_theory = false;
};

/// Builds a plan for `problem`. In strict mode eta > eta_max throws
/// InvalidArgument; in free mode the plan is tagged out_of_theory instead.
/// `burn_in` overrides the default ceil(24 / (mu eta)).
StepPlan make_step_plan(const ProblemConstants& c, Setting setting, double eta,
                        StepMode mode = StepMode::strict,
                        std::optional<std::size_t> burn_in = std::nullopt);

/// Markovian optimizer state after t samples. Within the current loop the
/// counter s runs from 1; `theta` is theta_t, `theta_prev` is theta_{t-1} and
/// `v` is v_t.
struct RootSgdState {
  std::size_t t = 0;
  std::size_t loop_counter = 0;
  Vector theta;
  Vector theta_prev;
  Vector v;
  Phase phase = Phase::burn_in;

  // Scratch for the two same-sample gradients.
  Vector g1;
  Vector g2;
};

/// State at theta_0 before any sample; theta_{-1} is set to theta_0.
RootSgdState make_state(std::span<const double> theta0);

/// One burn-in sample: v <- v + (grad f(theta_0; xi) - v)/s with theta frozen.
/// When s reaches plan.burn_in the first step theta_B = theta_0 - eta v_B is
/// taken and the phase switches to running. Throws PhaseViolation outside
/// burn-in.
void burn_in_step(RootSgdState& state, const Sample& xi, const Problem& p,
                  const StepPlan& plan);

/// v_s = g1 + ((s-1)/s)(v_{s-1} - g2) with g1 = grad f(theta_{t-1}; xi),
/// g2 = grad f(theta_{t-2}; xi); then theta_t = theta_{t-1} - eta v_s.
void step(RootSgdState& state, const Sample& xi, const Problem& p, double eta);

/// Same update written as (1/s) g1 + ((s-1)/s)(v + g1 - g2).
void step_hybrid_form(RootSgdState& state, const Sample& xi, const Problem& p,
                      double eta);

/// Dispatches to burn_in_step or step according to the phase.
void advance(RootSgdState& state, const Sample& xi, const Problem& p,
             const StepPlan& plan);

/// Resets the loop counter and re-enters burn-in at the current theta.
void restart_loop(RootSgdState& state);

struct ProbeRecord {
  std::size_t t = 0;
  Vector theta;  // theta_t
  Vector v;      // v_t
  Vector z;      // v_t - grad F(theta_{t-1})
};

struct RunResult {
  Vector theta;
  std::size_t samples_consumed = 0;
  std::vector<ProbeRecord> probes;
};

/// Algorithm with burn-in: consumes exactly T samples. `probes` lists
/// iteration indices in [1, T] to record. Throws HorizonTooShort if
/// T < plan.burn_in.
RunResult run(const Problem& p, std::span<const double> theta0,
              const StepPlan& plan, std::size_t T, RandomStream& stream,
              std::span<const std::size_t> probes = {});

struct RestartSchedule {
  std::size_t loops = 0;       // K
  double initial_target = 0.0; // G_0^2
  Vector targets;              // G_1^2 .. G_K^2
  std::vector<std::size_t> timestamps;  // Delta_0 = 0, Delta_1, ..., Delta_K
  double eta = 0.0;

  std::size_t total_samples() const { return timestamps.back(); }
};

/// K = ceil(log2(G_0^2/eps^2 v 1)), G_k^2 = G_0^2 / 2^k and
/// Delta_k - Delta_{k-1} = ceil(max(105/(eta mu), 112 sigma^2 / G_{k-1}^2)).
RestartSchedule restart_schedule(const ProblemConstants& c, double g0_sq,
                                 double eps_sq, double eta);

struct RestartResult {
  Vector theta;
  std::size_t samples_consumed = 0;
  /// State at each Delta_k, k = 1..K.
  std::vector<ProbeRecord> loop_ends;
};

/// Restarted variant: each loop resets the counter, re-runs the burn-in of
/// length plan.burn_in at the current point and stops at its timestamp.
RestartResult run_with_restarts(const Problem& p, std::span<const double> theta0,
                                const StepPlan& plan,
                                const RestartSchedule& schedule,
                                RandomStream& stream);

/// 2700 G0^2 / (eta^2 mu^2 (T+1)^2) + 28 sigma^2 / (T+1).
double gradient_norm_bound(double g0_sq, double eta, double mu, double sigma_sq,
                           std::size_t T);
/// max(74/(eta mu) (G0/eps v 1), 56 sigma^2 / eps^2).
double sample_complexity(double g0_sq, double eps_sq, double eta, double mu,
                         double sigma_sq);
/// 105/(eta mu) K + 224 sigma^2 (1/eps^2 v 1/G0^2).
double restart_complexity(double g0_sq, double eps_sq, double eta, double mu,
                          double sigma_sq);
/// ceil(log2(ratio v 1)) computed without floating-point log.
std::size_t restart_loop_count(double g0_sq, double eps_sq);

}  // namespace rootsgd
