#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rootsgd/problem.hpp"
#include "rootsgd/random.hpp"
#include "rootsgd/root_sgd.hpp"

namespace rootsgd {

/// H*, Sigma* and E[Xi (x) Xi] at theta*.
struct HessianNoiseModel {
  DenseMatrix hessian;
  DenseMatrix noise_cov;
  /// d^2 x d^2, entry [i*d + k, j*d + l] = E[Xi_ij Xi_kl].
  DenseMatrix tensor;
  EstimateInfo provenance;

  std::size_t dimension() const { return hessian.rows(); }

  static HessianNoiseModel from_constants(const ProblemConstants& c);
  static HessianNoiseModel from_problem(const Problem& p) {
    return from_constants(p.constants());
  }
};

/// E[Xi M Xi] for the flattened tensor.
DenseMatrix apply_hessian_noise(const DenseMatrix& tensor, const DenseMatrix& m);

/// Matrix acting on column-stacked vec(M) as vec(E[Xi M Xi]).
DenseMatrix hessian_noise_operator(const DenseMatrix& tensor, std::size_t d);

/// (H*)^-1 Sigma* (H*)^-1. Throws SingularMatrix for singular H*.
DenseMatrix cramer_rao(const DenseMatrix& hessian, const DenseMatrix& noise_cov);

/// Symmetric solution of Lambda H + H Lambda - eta E[Xi Lambda Xi]
/// - eta H Lambda H = eta Sigma*. Throws SingularOperator when the flattened
/// system is singular or the residual exceeds 1e-10 relative.
DenseMatrix solve_lambda(const HessianNoiseModel& model, double eta);

/// Solution Q of H Q + Q H - eta (H Q H + E[Xi Q Xi]) = Sigma* / eta, solved
/// on its own (it equals Lambda / eta^2).
DenseMatrix stationary_q(const HessianNoiseModel& model, double eta);

/// ||Lambda H + H Lambda - eta E[Xi Lambda Xi] - eta H Lambda H - eta Sigma*||_F
/// divided by ||eta Sigma*||_F (absolute when Sigma* = 0).
double lambda_residual(const HessianNoiseModel& model, double eta,
                       const DenseMatrix& lambda);

/// (H*)^-1 E[Xi Lambda Xi] (H*)^-1.
DenseMatrix correction_matrix(const HessianNoiseModel& model,
                              const DenseMatrix& lambda);

struct EmpiricalCovariance {
  DenseMatrix covariance;       // divisor n - 1
  DenseMatrix standard_errors;  // jackknife, per entry
  std::size_t replicates = 0;
};

/// Sample covariance of the rows with jackknife standard errors. Throws
/// InsufficientData for fewer than two rows.
EmpiricalCovariance empirical_covariance(const std::vector<Vector>& rows);

struct CovarianceComparison {
  double frobenius_relative_gap = 0.0;
  /// Largest |empirical - predicted| / standard error over entries.
  double max_standard_errors = 0.0;
  bool within_standard_errors = false;
  bool within_frobenius = false;
  bool matches = false;
};

/// Passes when every entry is within `se_multiplier` jackknife standard
/// errors or the Frobenius-relative gap is at most `frobenius_tolerance`.
CovarianceComparison compare_covariance(const EmpiricalCovariance& empirical,
                                        const DenseMatrix& predicted,
                                        double se_multiplier = 5.0,
                                        double frobenius_tolerance = 0.10);

struct CovarianceReport {
  double eta = 0.0;
  DenseMatrix cramer_rao;
  DenseMatrix lambda_eta;
  DenseMatrix correction;
  DenseMatrix predicted_total;
  std::optional<EmpiricalCovariance> empirical;
  std::optional<CovarianceComparison> comparison;
};

CovarianceReport make_covariance_report(
    const HessianNoiseModel& model, double eta,
    std::optional<EmpiricalCovariance> empirical = std::nullopt);

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  /// 95% Student-t half-width of the slope (0 for an exact fit).
  double half_width = 0.0;
  std::size_t points = 0;
};

/// OLS of log(value) on log(t). Needs at least four points spanning a decade
/// in t (InsufficientData otherwise) and positive values.
SlopeFit rate_slope(std::span<const double> ts, std::span<const double> values);

struct TraceBoundReport {
  double trace_actual = 0.0;
  double trace_bound = 0.0;
  bool satisfied = false;
};

/// tr(correction) against eta l_Xi^2 sigma^2 / mu^3.
TraceBoundReport correction_trace_bound(const HessianNoiseModel& model,
                                        double eta, double mu,
                                        double noise_lipschitz,
                                        double sigma_sq);

struct YProbe {
  std::size_t t = 0;
  Vector y;
};

struct YTrace {
  Vector final_y;
  std::vector<YProbe> probes;
  /// (1/(T - skip)) sum_{t > skip} y_t y_t^T.
  DenseMatrix time_average_outer;
};

/// y_t = y_{t-1} - eta H_t(theta*) y_{t-1} + eps_t(theta*) for t = 1..T from
/// y_0 = `start` (zeros when empty). Throws UnsupportedOperation without
/// stochastic Hessians.
YTrace simulate_y(const Problem& p, double eta, std::size_t T,
                  RandomStream& stream, std::span<const double> start = {},
                  std::span<const std::size_t> probes = {},
                  std::size_t skip = 0);

struct CouplingPoint {
  std::size_t t = 0;
  double mean = 0.0;
  double standard_error = 0.0;
};

/// Monte Carlo E||t v_t - y_t||^2 at the probes, with y started at
/// y_B = B v_B and driven by the same samples as the optimizer.
std::vector<CouplingPoint> coupling_diagnostic(
    const Problem& p, std::span<const double> theta0, const StepPlan& plan,
    std::span<const std::size_t> probes, std::size_t replicates,
    std::uint64_t master_seed, unsigned workers);

/// Per-replicate squared coupling gaps at the probes.
std::vector<double> coupling_gaps(const Problem& p,
                                  std::span<const double> theta0,
                                  const StepPlan& plan,
                                  std::span<const std::size_t> probes,
                                  RandomStream& stream);

}  // namespace rootsgd
