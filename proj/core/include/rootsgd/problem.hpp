#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rootsgd/linalg.hpp"
#include "rootsgd/random.hpp"

namespace rootsgd {

/// One draw xi ~ P. The payload layout is owned by the problem that produced
/// it; the optimizers only pass samples back to that problem. A sample is
/// never modified after drawing, so it can be evaluated at several points.
struct Sample {
  std::vector<double> values;
};

enum class Provenance { analytic, monte_carlo };

struct EstimateInfo {
  Provenance provenance = Provenance::analytic;
  std::size_t sample_count = 0;
  /// Largest standard error over the estimated entries (0 when analytic).
  double max_standard_error = 0.0;
};

/// Problem constants used by step-size rules and the covariance analysis.
struct ProblemConstants {
  std::size_t dimension = 0;
  Vector theta_star;
  double mu = 0.0;  // strong convexity of F
  double L = 0.0;   // smoothness of F
  std::optional<double> noise_lipschitz;          // l_Xi
  std::optional<double> individual_smoothness;    // l_max
  double sigma_star_sq = 0.0;                     // E||grad f(theta*; xi)||^2
  DenseMatrix hessian_star;                       // H*
  DenseMatrix noise_cov_star;                     // Sigma*
  std::optional<double> hessian_fourth_moment;    // l'_Xi
  std::optional<double> hessian_lipschitz;        // beta
  /// E[Xi(theta*) (x) Xi(theta*)] as a d^2 x d^2 matrix with
  /// entry [i*d + k, j*d + l] = E[Xi_ij Xi_kl].
  DenseMatrix hessian_noise_tensor;
  EstimateInfo estimate;
};

/// Stochastic objective F(theta) = E f(theta; xi).
class Problem {
 public:
  virtual ~Problem() = default;

  virtual std::string_view name() const = 0;
  std::size_t dimension() const { return constants_.dimension; }
  const ProblemConstants& constants() const { return constants_; }

  virtual void draw_into(RandomStream& stream, Sample& out) const = 0;
  Sample draw(RandomStream& stream) const;

  /// grad f(theta; xi); deterministic in (theta, xi).
  Vector stochastic_grad(std::span<const double> theta, const Sample& xi) const;
  /// grad F(theta).
  Vector population_grad(std::span<const double> theta) const;
  /// eps(theta) = grad f(theta; xi) - grad F(theta).
  Vector noise_at(std::span<const double> theta, const Sample& xi) const;
  /// Hessian of f(.; xi) at theta.
  DenseMatrix stochastic_hessian(std::span<const double> theta,
                                 const Sample& xi) const;

  virtual bool has_hessian() const { return false; }

  // Unchecked kernels for the optimizer hot loops. `out` must have length d.
  virtual void grad_into(std::span<const double> theta, const Sample& xi,
                         std::span<double> out) const = 0;
  virtual void population_grad_into(std::span<const double> theta,
                                    std::span<double> out) const = 0;

 protected:
  explicit Problem(ProblemConstants constants)
      : constants_(std::move(constants)) {}
  void set_constants(ProblemConstants constants) {
    constants_ = std::move(constants);
  }
  void require_dimension(std::span<const double> theta, const char* what) const;

  virtual DenseMatrix hessian_impl(std::span<const double> theta,
                                   const Sample& xi) const;

 private:
  ProblemConstants constants_;
};

/// E[Xi^2] contracted from the flattened tensor:
/// E[Xi^2]_ik = sum_j tensor[i*d + j, j*d + k].
DenseMatrix hessian_noise_square(const DenseMatrix& tensor, std::size_t d);

}  // namespace rootsgd
