#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "gaussian_moments.hpp"
#include "rootsgd/errors.hpp"
#include "rootsgd/problems.hpp"

namespace rootsgd {

namespace {

constexpr std::size_t kMaxDimension = 20;
constexpr std::size_t kMaxNewtonIterations = 100;
constexpr double kGradientTolerance = 1e-10;

double sigmoid(double m) {
  if (m >= 0.0) return 1.0 / (1.0 + std::exp(-m));
  const double e = std::exp(m);
  return e / (1.0 + e);
}

/// log(1 + exp(-m)) without overflow.
double softplus_neg(double m) {
  return m >= 0.0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
}

std::size_t upper_index(std::size_t i, std::size_t j, std::size_t d) {
  if (i > j) std::swap(i, j);
  return i * d - i * (i + 1) / 2 + j;
}

}  // namespace

LogisticRegression::LogisticRegression(const DenseMatrix& design_cov,
                                       Vector theta_gen, double ridge,
                                       std::uint64_t seed,
                                       LogisticRegressionOptions options)
    : Problem(ProblemConstants{}),
      d_(design_cov.rows()),
      ridge_(ridge),
      theta_gen_(std::move(theta_gen)) {
  if (!design_cov.is_square() || d_ == 0 || d_ > kMaxDimension) {
    throw InvalidArgument("logistic_regression: design_cov must be d x d with 1 <= d <= 20");
  }
  require_symmetric(design_cov, "logistic_regression design_cov");
  if (!(ridge > 0.0) || !std::isfinite(ridge)) {
    throw InvalidArgument("logistic_regression: ridge must be positive");
  }
  if (theta_gen_.size() != d_) {
    throw DimensionMismatch("logistic_regression: theta_gen must have length d");
  }
  if (options.evaluation_samples < 2) {
    throw InvalidArgument("logistic_regression: evaluation_samples must be >= 2");
  }
  const SymmetricEigen design_eig = symmetric_eigen(design_cov);
  if (!(design_eig.values.front() > 0.0)) {
    throw InvalidArgument("logistic_regression: design_cov must be positive definite");
  }
  design_factor_ = cholesky(design_cov);

  const std::size_t d = d_;
  const std::size_t n = options.evaluation_samples;
  frozen_x_.resize(n * d);
  frozen_y_.resize(n);
  {
    RandomStream stream(seed, 0, stream_domain::evaluation);
    Sample s;
    for (std::size_t r = 0; r < n; ++r) {
      draw_into(stream, s);
      std::copy(s.values.begin(), s.values.begin() + d, frozen_x_.begin() + r * d);
      frozen_y_[r] = s.values[d];
    }
  }

  // Damped Newton on the frozen-sample objective.
  auto objective = [&](std::span<const double> theta) {
    double sum = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      const double* x = &frozen_x_[r * d];
      double m = 0.0;
      for (std::size_t i = 0; i < d; ++i) m += x[i] * theta[i];
      sum += softplus_neg(frozen_y_[r] * m);
    }
    return sum / static_cast<double>(n) + 0.5 * ridge_ * norm_sq(theta);
  };

  Vector theta(d, 0.0);
  Vector grad(d);
  population_grad_into(theta, grad);
  double value = objective(theta);
  std::size_t iter = 0;
  while (norm2(grad) > kGradientTolerance) {
    if (iter == kMaxNewtonIterations) {
      throw Error("logistic_regression: Newton's method did not reach ||grad|| <= 1e-10");
    }
    const Vector direction = solve_dense(batch_hessian(theta), grad);
    double step = 1.0;
    Vector trial(d);
    Vector trial_grad(d);
    const double grad_norm = norm2(grad);
    for (int halvings = 0;; ++halvings) {
      for (std::size_t i = 0; i < d; ++i) trial[i] = theta[i] - step * direction[i];
      const double trial_value = objective(trial);
      population_grad_into(trial, trial_grad);
      if (trial_value <= value - 1e-4 * step * dot(grad, direction) ||
          norm2(trial_grad) < grad_norm || halvings == 50) {
        value = trial_value;
        break;
      }
      step *= 0.5;
    }
    theta = trial;
    grad = trial_grad;
    ++iter;
  }
  newton_iterations_ = iter;

  ProblemConstants c;
  c.dimension = d;
  c.theta_star = theta;
  c.mu = ridge_;
  c.L = ridge_ + 0.25 * design_eig.values.back();
  c.hessian_star = batch_hessian(theta);

  // Per-sample gradient covariance and Hessian-noise tensor at theta*, with
  // Xi = h x x^T - mean(h x x^T) (the ridge term cancels).
  const std::size_t m = d * (d + 1) / 2;
  Vector grad_sum(d, 0.0);
  DenseMatrix grad_outer(d, d);
  std::vector<double> curvature_sum(m, 0.0);
  std::vector<double> pair_sum(m * m, 0.0);
  std::vector<double> pair_sq(m * m, 0.0);
  std::vector<double> entries(m);
  for (std::size_t r = 0; r < n; ++r) {
    const double* x = &frozen_x_[r * d];
    const double y = frozen_y_[r];
    double margin = 0.0;
    for (std::size_t i = 0; i < d; ++i) margin += x[i] * theta[i];
    const double coeff = -y * sigmoid(-y * margin);
    for (std::size_t i = 0; i < d; ++i) {
      const double gi = coeff * x[i] + ridge_ * theta[i];
      grad_sum[i] += gi;
      for (std::size_t k = 0; k <= i; ++k) {
        grad_outer(i, k) += gi * (coeff * x[k] + ridge_ * theta[k]);
      }
    }
    const double p = sigmoid(margin);
    const double h = p * (1.0 - p);
    for (std::size_t i = 0, a = 0; i < d; ++i)
      for (std::size_t j = i; j < d; ++j, ++a) {
        entries[a] = h * x[i] * x[j];
        curvature_sum[a] += entries[a];
      }
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = a; b < m; ++b) {
        const double u = entries[a] * entries[b];
        pair_sum[a * m + b] += u;
        pair_sq[a * m + b] += u * u;
      }
  }
  const double nd = static_cast<double>(n);
  c.noise_cov_star = DenseMatrix(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t k = 0; k <= i; ++k) {
      const double v = grad_outer(i, k) / nd - (grad_sum[i] / nd) * (grad_sum[k] / nd);
      c.noise_cov_star(i, k) = v;
      c.noise_cov_star(k, i) = v;
    }
  c.sigma_star_sq = c.noise_cov_star.trace();

  double max_se = 0.0;
  c.hessian_noise_tensor = DenseMatrix(d * d, d * d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t k = 0; k < d; ++k)
        for (std::size_t l = 0; l < d; ++l) {
          std::size_t a = upper_index(i, j, d);
          std::size_t b = upper_index(k, l, d);
          if (a > b) std::swap(a, b);
          const double mean_a = curvature_sum[a] / nd;
          const double mean_b = curvature_sum[b] / nd;
          c.hessian_noise_tensor(i * d + k, j * d + l) =
              pair_sum[a * m + b] / nd - mean_a * mean_b;
        }
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = a; b < m; ++b) {
      const double mu1 = pair_sum[a * m + b] / nd;
      const double var = std::max(0.0, pair_sq[a * m + b] / nd - mu1 * mu1);
      max_se = std::max(max_se, std::sqrt(var / nd));
    }

  // sigma'(.) <= 1/4, so the linear-regression moment bounds scale by 1/4.
  const DenseMatrix& s = design_cov;
  const DenseMatrix xi_sq_bound = s.trace() * s + 2.0 * (s * s);
  c.noise_lipschitz = std::sqrt(max_eigenvalue(symmetrized(xi_sq_bound)) / 16.0);
  c.hessian_fourth_moment =
      0.25 * detail::gaussian_outer_fourth_root_bound(design_eig.values) + ridge_;
  c.estimate = EstimateInfo{Provenance::monte_carlo, n, max_se};
  set_constants(std::move(c));
}

void LogisticRegression::draw_into(RandomStream& stream, Sample& out) const {
  const std::size_t d = d_;
  out.values.resize(d + 1);
  std::array<double, kMaxDimension> z{};
  for (std::size_t i = 0; i < d; ++i) z[i] = stream.normal();
  double margin = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    double x = 0.0;
    for (std::size_t k = 0; k <= i; ++k) x += design_factor_(i, k) * z[k];
    out.values[i] = x;
    margin += x * theta_gen_[i];
  }
  out.values[d] = stream.sign_with_probability(sigmoid(margin));
}

void LogisticRegression::grad_into(std::span<const double> theta,
                                   const Sample& xi,
                                   std::span<double> out) const {
  const std::size_t d = d_;
  const double* x = xi.values.data();
  const double y = x[d];
  double margin = 0.0;
  for (std::size_t i = 0; i < d; ++i) margin += x[i] * theta[i];
  const double coeff = -y * sigmoid(-y * margin);
  for (std::size_t i = 0; i < d; ++i) out[i] = coeff * x[i] + ridge_ * theta[i];
}

void LogisticRegression::population_grad_into(std::span<const double> theta,
                                              std::span<double> out) const {
  const std::size_t d = d_;
  const std::size_t n = frozen_y_.size();
  std::array<double, kMaxDimension> acc{};
  for (std::size_t r = 0; r < n; ++r) {
    const double* x = &frozen_x_[r * d];
    const double y = frozen_y_[r];
    double margin = 0.0;
    for (std::size_t i = 0; i < d; ++i) margin += x[i] * theta[i];
    const double coeff = -y * sigmoid(-y * margin);
    for (std::size_t i = 0; i < d; ++i) acc[i] += coeff * x[i];
  }
  for (std::size_t i = 0; i < d; ++i)
    out[i] = acc[i] / static_cast<double>(n) + ridge_ * theta[i];
}

DenseMatrix LogisticRegression::batch_hessian(std::span<const double> theta) const {
  const std::size_t d = d_;
  const std::size_t n = frozen_y_.size();
  DenseMatrix h(d, d);
  for (std::size_t r = 0; r < n; ++r) {
    const double* x = &frozen_x_[r * d];
    double margin = 0.0;
    for (std::size_t i = 0; i < d; ++i) margin += x[i] * theta[i];
    const double p = sigmoid(margin);
    const double w = p * (1.0 - p);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t k = 0; k <= i; ++k) h(i, k) += w * x[i] * x[k];
  }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t k = 0; k <= i; ++k) {
      const double v = h(i, k) / static_cast<double>(n) + (i == k ? ridge_ : 0.0);
      h(i, k) = v;
      h(k, i) = v;
    }
  return h;
}

DenseMatrix LogisticRegression::hessian_impl(std::span<const double> theta,
                                             const Sample& xi) const {
  if (xi.values.size() != d_ + 1) {
    throw DimensionMismatch("logistic_regression: sample has wrong layout");
  }
  const std::span<const double> x(xi.values.data(), d_);
  const double p = sigmoid(dot(x, theta));
  DenseMatrix h = p * (1.0 - p) * DenseMatrix::outer(x, x);
  for (std::size_t i = 0; i < d_; ++i) h(i, i) += ridge_;
  return h;
}

std::shared_ptr<const LogisticRegression> make_logistic_regression(
    std::size_t d, const DenseMatrix& design_cov, Vector theta_gen,
    double ridge, std::uint64_t seed, LogisticRegressionOptions options) {
  if (design_cov.rows() != d || design_cov.cols() != d) {
    throw DimensionMismatch("logistic_regression: design_cov must be " +
                            std::to_string(d) + " x " + std::to_string(d));
  }
  return std::make_shared<const LogisticRegression>(
      design_cov, std::move(theta_gen), ridge, seed, options);
}

}  // namespace rootsgd
