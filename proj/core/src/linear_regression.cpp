#include <array>
#include <cmath>
#include <string>

#include "gaussian_moments.hpp"
#include "rootsgd/errors.hpp"
#include "rootsgd/problems.hpp"

namespace rootsgd {

namespace {

constexpr std::size_t kMaxDimension = 20;

}  // namespace

LinearRegression::LinearRegression(const DenseMatrix& design_cov,
                                   double noise_std, Vector theta_star)
    : Problem(ProblemConstants{}),
      d_(design_cov.rows()),
      noise_std_(noise_std),
      design_cov_(design_cov),
      theta_star_(std::move(theta_star)) {
  if (!design_cov.is_square() || d_ == 0 || d_ > kMaxDimension) {
    throw InvalidArgument("linear_regression: design_cov must be d x d with 1 <= d <= 20");
  }
  require_symmetric(design_cov, "linear_regression design_cov");
  if (!(noise_std > 0.0) || !std::isfinite(noise_std)) {
    throw InvalidArgument("linear_regression: noise_std must be positive");
  }
  if (theta_star_.empty()) theta_star_.assign(d_, 0.0);
  if (theta_star_.size() != d_) {
    throw DimensionMismatch("linear_regression: theta_star must have length d");
  }
  const SymmetricEigen eig = symmetric_eigen(design_cov);
  if (!(eig.values.front() > 0.0)) {
    throw InvalidArgument("linear_regression: design_cov must be positive definite");
  }
  design_factor_ = cholesky(design_cov);

  const std::size_t d = d_;
  const DenseMatrix& s = design_cov_;
  ProblemConstants c;
  c.dimension = d;
  c.theta_star = theta_star_;
  c.mu = eig.values.front();
  c.L = eig.values.back();
  c.hessian_star = symmetrized(s);
  c.noise_cov_star = noise_std * noise_std * c.hessian_star;
  c.sigma_star_sq = c.noise_cov_star.trace();

  // Isserlis: E[Xi_ij Xi_kl] = S_ik S_jl + S_il S_jk for Xi = xx^T - S.
  c.hessian_noise_tensor = DenseMatrix(d * d, d * d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t k = 0; k < d; ++k)
        for (std::size_t l = 0; l < d; ++l)
          c.hessian_noise_tensor(i * d + k, j * d + l) =
              s(i, k) * s(j, l) + s(i, l) * s(j, k);

  // E[Xi^2] = tr(S) S + S^2.
  const DenseMatrix xi_sq = s.trace() * s + s * s;
  c.noise_lipschitz = std::sqrt(max_eigenvalue(symmetrized(xi_sq)));
  c.hessian_fourth_moment = detail::gaussian_outer_fourth_root_bound(eig.values);
  c.hessian_lipschitz = 0.0;
  set_constants(std::move(c));
}

void LinearRegression::draw_into(RandomStream& stream, Sample& out) const {
  const std::size_t d = d_;
  out.values.resize(d + 1);
  std::array<double, kMaxDimension> z{};
  for (std::size_t i = 0; i < d; ++i) z[i] = stream.normal();
  double y = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    double x = 0.0;
    for (std::size_t k = 0; k <= i; ++k) x += design_factor_(i, k) * z[k];
    out.values[i] = x;
    y += x * theta_star_[i];
  }
  out.values[d] = y + noise_std_ * stream.normal();
}

void LinearRegression::grad_into(std::span<const double> theta,
                                 const Sample& xi, std::span<double> out) const {
  const std::size_t d = d_;
  const double* x = xi.values.data();
  double r = -x[d];
  for (std::size_t i = 0; i < d; ++i) r += x[i] * theta[i];
  for (std::size_t i = 0; i < d; ++i) out[i] = x[i] * r;
}

void LinearRegression::population_grad_into(std::span<const double> theta,
                                            std::span<double> out) const {
  const std::size_t d = d_;
  for (std::size_t i = 0; i < d; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < d; ++k)
      s += design_cov_(i, k) * (theta[k] - theta_star_[k]);
    out[i] = s;
  }
}

DenseMatrix LinearRegression::hessian_impl(std::span<const double>,
                                           const Sample& xi) const {
  if (xi.values.size() != d_ + 1) {
    throw DimensionMismatch("linear_regression: sample has wrong layout");
  }
  const std::span<const double> x(xi.values.data(), d_);
  return DenseMatrix::outer(x, x);
}

Sample LinearRegression::make_sample(std::span<const double> x, double y) {
  Sample s;
  s.values.assign(x.begin(), x.end());
  s.values.push_back(y);
  return s;
}

std::shared_ptr<const LinearRegression> make_linear_regression(
    std::size_t d, const DenseMatrix& design_cov, double noise_std,
    Vector theta_star) {
  if (design_cov.rows() != d || design_cov.cols() != d) {
    throw DimensionMismatch("linear_regression: design_cov must be " +
                            std::to_string(d) + " x " + std::to_string(d));
  }
  return std::make_shared<const LinearRegression>(design_cov, noise_std,
                                                  std::move(theta_star));
}

}  // namespace rootsgd
