#pragma once

#include <cstdint>
#include <memory>

#include "rootsgd/problem.hpp"

namespace rootsgd {

struct NoisyQuadraticOptions {
  Vector theta_star;  // empty means the origin
  /// Use Q diag(spectrum) Q^T with a seeded random rotation Q instead of the
  /// diagonal mean Hessian.
  bool rotate = false;
  /// Sample count for the Monte Carlo constants when clipping can occur.
  std::size_t estimation_samples = 1'000'000;
};

/// f(theta; xi) = 1/2 theta^T A theta - b^T theta with
/// A = Abar + scale * S (S symmetric, entries uniform on [-1, 1], eigenvalues
/// clipped from below at min(spectrum)/2) and b = A theta* + w,
/// w ~ N(0, grad_noise_cov). Sample layout: A row-major, then b.
class NoisyQuadratic final : public Problem {
 public:
  NoisyQuadratic(std::size_t d, Vector spectrum, double hessian_noise_scale,
                 const DenseMatrix& grad_noise_cov, std::uint64_t seed,
                 NoisyQuadraticOptions options);

  std::string_view name() const override { return "noisy_quadratic"; }
  bool has_hessian() const override { return true; }

  void draw_into(RandomStream& stream, Sample& out) const override;
  void grad_into(std::span<const double> theta, const Sample& xi,
                 std::span<double> out) const override;
  void population_grad_into(std::span<const double> theta,
                            std::span<double> out) const override;

  static Sample make_sample(const DenseMatrix& a, std::span<const double> b);
  DenseMatrix sample_matrix(const Sample& xi) const;

  /// E[A_xi] after clipping (equal to the configured matrix when clipping is
  /// impossible).
  const DenseMatrix& mean_hessian() const { return mean_hessian_; }
  const DenseMatrix& configured_hessian() const { return configured_hessian_; }
  double hessian_noise_scale() const { return noise_scale_; }
  /// True when scale * d exceeds min(spectrum)/2, i.e. some draw may be
  /// clipped.
  bool clipping_possible() const { return clipping_possible_; }

 protected:
  DenseMatrix hessian_impl(std::span<const double> theta,
                           const Sample& xi) const override;

 private:
  void draw_matrix(RandomStream& stream, std::span<double> a,
                   std::span<double> work) const;
  void estimate_constants(std::uint64_t seed, std::size_t samples,
                          ProblemConstants& c);

  std::size_t d_;
  double noise_scale_;
  double clip_floor_;
  bool clipping_possible_;
  DenseMatrix configured_hessian_;
  DenseMatrix mean_hessian_;
  DenseMatrix grad_noise_factor_;
  Vector theta_star_;
};

std::shared_ptr<const NoisyQuadratic> make_noisy_quadratic(
    std::size_t d, Vector spectrum, double hessian_noise_scale,
    const DenseMatrix& grad_noise_cov, std::uint64_t seed,
    NoisyQuadraticOptions options = {});

/// f(theta; (x, y)) = 1/2 (x^T theta - y)^2 with x ~ N(0, design_cov) and
/// y = x^T theta* + noise_std * z. Sample layout: x, then y.
class LinearRegression final : public Problem {
 public:
  LinearRegression(const DenseMatrix& design_cov, double noise_std,
                   Vector theta_star);

  std::string_view name() const override { return "linear_regression"; }
  bool has_hessian() const override { return true; }

  void draw_into(RandomStream& stream, Sample& out) const override;
  void grad_into(std::span<const double> theta, const Sample& xi,
                 std::span<double> out) const override;
  void population_grad_into(std::span<const double> theta,
                            std::span<double> out) const override;

  static Sample make_sample(std::span<const double> x, double y);

 protected:
  DenseMatrix hessian_impl(std::span<const double> theta,
                           const Sample& xi) const override;

 private:
  std::size_t d_;
  double noise_std_;
  DenseMatrix design_cov_;
  DenseMatrix design_factor_;
  Vector theta_star_;
};

std::shared_ptr<const LinearRegression> make_linear_regression(
    std::size_t d, const DenseMatrix& design_cov, double noise_std,
    Vector theta_star);

struct LogisticRegressionOptions {
  /// Size of the frozen evaluation sample that pins theta*, H* and Sigma*.
  std::size_t evaluation_samples = 1'000'000;
};

/// f(theta; (x, y)) = log(1 + exp(-y x^T theta)) + ridge/2 ||theta||^2 with
/// x ~ N(0, design_cov) and P(y = 1 | x) = sigmoid(x^T theta_gen).
///
/// There is no closed form for grad F, so the population gradient is the
/// full-batch gradient over a frozen evaluation sample, and theta* is that
/// surrogate's minimizer (found by Newton's method to ||grad|| <= 1e-10).
/// The reported H*, Sigma* and Hessian-noise tensor are estimates on the same
/// sample; constants().estimate records this.
class LogisticRegression final : public Problem {
 public:
  LogisticRegression(const DenseMatrix& design_cov, Vector theta_gen,
                     double ridge, std::uint64_t seed,
                     LogisticRegressionOptions options);

  std::string_view name() const override { return "logistic_regression"; }
  bool has_hessian() const override { return true; }

  void draw_into(RandomStream& stream, Sample& out) const override;
  void grad_into(std::span<const double> theta, const Sample& xi,
                 std::span<double> out) const override;
  void population_grad_into(std::span<const double> theta,
                            std::span<double> out) const override;

  const Vector& theta_gen() const { return theta_gen_; }
  std::size_t newton_iterations() const { return newton_iterations_; }

 protected:
  DenseMatrix hessian_impl(std::span<const double> theta,
                           const Sample& xi) const override;

 private:
  DenseMatrix batch_hessian(std::span<const double> theta) const;

  std::size_t d_;
  double ridge_;
  DenseMatrix design_factor_;
  Vector theta_gen_;
  std::vector<double> frozen_x_;  // n x d, row-major
  std::vector<double> frozen_y_;
  std::size_t newton_iterations_ = 0;
};

std::shared_ptr<const LogisticRegression> make_logistic_regression(
    std::size_t d, const DenseMatrix& design_cov, Vector theta_gen,
    double ridge, std::uint64_t seed, LogisticRegressionOptions options = {});

}  // namespace rootsgd
