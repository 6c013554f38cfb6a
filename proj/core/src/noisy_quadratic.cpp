#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "rootsgd/errors.hpp"
#include "rootsgd/problems.hpp"

namespace rootsgd {

namespace {

constexpr std::size_t kMaxDimension = 20;

DenseMatrix random_rotation(std::size_t d, std::uint64_t seed) {
  RandomStream stream(seed, 0, stream_domain::construction);
  DenseMatrix q(d, d);
  for (double& e : q.entries()) e = stream.normal();
  // Modified Gram-Schmidt on the columns.
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t k = 0; k < j; ++k) {
      double proj = 0.0;
      for (std::size_t i = 0; i < d; ++i) proj += q(i, k) * q(i, j);
      for (std::size_t i = 0; i < d; ++i) q(i, j) -= proj * q(i, k);
    }
    double norm = 0.0;
    for (std::size_t i = 0; i < d; ++i) norm += q(i, j) * q(i, j);
    norm = std::sqrt(norm);
    for (std::size_t i = 0; i < d; ++i) q(i, j) /= norm;
  }
  return q;
}

std::size_t upper_index(std::size_t i, std::size_t j, std::size_t d) {
  if (i > j) std::swap(i, j);
  return i * d - i * (i + 1) / 2 + j;
}

}  // namespace

NoisyQuadratic::NoisyQuadratic(std::size_t d, Vector spectrum,
                               double hessian_noise_scale,
                               const DenseMatrix& grad_noise_cov,
                               std::uint64_t seed,
                               NoisyQuadraticOptions options)
    : Problem(ProblemConstants{}), d_(d), noise_scale_(hessian_noise_scale) {
  if (d == 0 || d > kMaxDimension) {
    throw InvalidArgument("noisy_quadratic: dimension must be in [1, 20], got " +
                          std::to_string(d));
  }
  if (spectrum.size() != d) {
    throw InvalidArgument("noisy_quadratic: spectrum has " +
                          std::to_string(spectrum.size()) + " entries for d = " +
                          std::to_string(d));
  }
  for (double e : spectrum) {
    if (!(e > 0.0) || !std::isfinite(e)) {
      throw InvalidArgument("noisy_quadratic: spectrum entries must be positive");
    }
  }
  if (!(hessian_noise_scale >= 0.0)) {
    throw InvalidArgument("noisy_quadratic: hessian_noise_scale must be >= 0");
  }
  if (grad_noise_cov.rows() != d || grad_noise_cov.cols() != d) {
    throw DimensionMismatch("noisy_quadratic: grad_noise_cov must be d x d");
  }
  require_symmetric(grad_noise_cov, "noisy_quadratic grad_noise_cov");
  grad_noise_factor_ = psd_factor(grad_noise_cov);

  theta_star_ = options.theta_star.empty() ? Vector(d, 0.0) : options.theta_star;
  if (theta_star_.size() != d) {
    throw DimensionMismatch("noisy_quadratic: theta_star must have length d");
  }

  const auto [lo, hi] = std::minmax_element(spectrum.begin(), spectrum.end());
  const double spectrum_min = *lo;
  const double spectrum_max = *hi;
  clip_floor_ = 0.5 * spectrum_min;
  // ||S||_2 <= d for entries in [-1, 1].
  clipping_possible_ = noise_scale_ * static_cast<double>(d) > clip_floor_;

  if (options.rotate) {
    const DenseMatrix q = random_rotation(d, seed);
    configured_hessian_ =
        symmetrized(q * DenseMatrix::diagonal(spectrum) * q.transpose());
  } else {
    configured_hessian_ = DenseMatrix::diagonal(spectrum);
  }
  mean_hessian_ = configured_hessian_;

  ProblemConstants c;
  c.dimension = d;
  c.theta_star = theta_star_;
  c.noise_cov_star = symmetrized(grad_noise_cov);
  c.sigma_star_sq = c.noise_cov_star.trace();
  c.hessian_lipschitz = 0.0;

  if (clipping_possible_) {
    estimate_constants(seed, options.estimation_samples, c);
  } else {
    // E[S_ij S_kl] = 1/3 when {i, j} = {k, l}, zero otherwise.
    const double v = noise_scale_ * noise_scale_ / 3.0;
    c.hessian_noise_tensor = DenseMatrix(d * d, d * d);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j)
        for (std::size_t k = 0; k < d; ++k)
          for (std::size_t l = 0; l < d; ++l) {
            const bool same = (i == k && j == l) || (i == l && j == k);
            c.hessian_noise_tensor(i * d + k, j * d + l) = same ? v : 0.0;
          }
    c.mu = spectrum_min;
    c.L = spectrum_max;
  }
  c.hessian_star = mean_hessian_;

  const DenseMatrix xi_sq = hessian_noise_square(c.hessian_noise_tensor, d);
  c.noise_lipschitz = std::sqrt(std::max(0.0, max_eigenvalue(xi_sq)));
  const double as_bound = spectrum_max + noise_scale_ * static_cast<double>(d);
  c.individual_smoothness = std::max(c.L, as_bound);
  c.hessian_fourth_moment = c.individual_smoothness;
  set_constants(std::move(c));
}

void NoisyQuadratic::draw_matrix(RandomStream& stream, std::span<double> a,
                                 std::span<double> work) const {
  const std::size_t d = d_;
  const auto mean = configured_hessian_.entries();
  std::copy(mean.begin(), mean.end(), a.begin());
  if (noise_scale_ == 0.0) return;

  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) {
      const double s = noise_scale_ * stream.uniform(-1.0, 1.0);
      a[i * d + j] += s;
      if (j != i) a[j * d + i] += s;
    }
  if (!clipping_possible_) return;

  std::copy(a.begin(), a.end(), work.begin());
  for (std::size_t i = 0; i < d; ++i) work[i * d + i] -= clip_floor_;
  if (try_cholesky_in_place(work, d)) return;

  DenseMatrix m(d, d, std::vector<double>(a.begin(), a.end()));
  const SymmetricEigen eig = symmetric_eigen(m);
  std::fill(a.begin(), a.end(), 0.0);
  for (std::size_t k = 0; k < d; ++k) {
    const double lambda = std::max(eig.values[k], clip_floor_);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j)
        a[i * d + j] += lambda * eig.vectors(i, k) * eig.vectors(j, k);
  }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j)
      a[i * d + j] = a[j * d + i] = 0.5 * (a[i * d + j] + a[j * d + i]);
}

void NoisyQuadratic::draw_into(RandomStream& stream, Sample& out) const {
  const std::size_t d = d_;
  out.values.resize(d * d + d);
  std::span<double> a(out.values.data(), d * d);
  std::span<double> b(out.values.data() + d * d, d);
  std::array<double, kMaxDimension * kMaxDimension> work{};
  draw_matrix(stream, a, work);

  std::array<double, kMaxDimension> z{};
  for (std::size_t i = 0; i < d; ++i) z[i] = stream.normal();
  for (std::size_t i = 0; i < d; ++i) {
    double w = 0.0;
    for (std::size_t k = 0; k < d; ++k) w += grad_noise_factor_(i, k) * z[k];
    double at = 0.0;
    for (std::size_t k = 0; k < d; ++k) at += a[i * d + k] * theta_star_[k];
    b[i] = at + w;
  }
}

void NoisyQuadratic::grad_into(std::span<const double> theta, const Sample& xi,
                               std::span<double> out) const {
  const std::size_t d = d_;
  const double* a = xi.values.data();
  const double* b = a + d * d;
  for (std::size_t i = 0; i < d; ++i) {
    double s = -b[i];
    for (std::size_t k = 0; k < d; ++k) s += a[i * d + k] * theta[k];
    out[i] = s;
  }
}

void NoisyQuadratic::population_grad_into(std::span<const double> theta,
                                          std::span<double> out) const {
  const std::size_t d = d_;
  for (std::size_t i = 0; i < d; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < d; ++k)
      s += mean_hessian_(i, k) * (theta[k] - theta_star_[k]);
    out[i] = s;
  }
}

DenseMatrix NoisyQuadratic::hessian_impl(std::span<const double>,
                                         const Sample& xi) const {
  return sample_matrix(xi);
}

Sample NoisyQuadratic::make_sample(const DenseMatrix& a,
                                   std::span<const double> b) {
  if (!a.is_square() || a.rows() != b.size()) {
    throw DimensionMismatch("noisy_quadratic sample: A must be d x d, b length d");
  }
  Sample s;
  s.values.assign(a.entries().begin(), a.entries().end());
  s.values.insert(s.values.end(), b.begin(), b.end());
  return s;
}

DenseMatrix NoisyQuadratic::sample_matrix(const Sample& xi) const {
  if (xi.values.size() != d_ * d_ + d_) {
    throw DimensionMismatch("noisy_quadratic: sample has wrong layout");
  }
  return DenseMatrix(d_, d_,
                     std::vector<double>(xi.values.begin(),
                                         xi.values.begin() + d_ * d_));
}

void NoisyQuadratic::estimate_constants(std::uint64_t seed, std::size_t samples,
                                        ProblemConstants& c) {
  if (samples < 2) {
    throw InvalidArgument("noisy_quadratic: estimation_samples must be >= 2");
  }
  const std::size_t d = d_;
  const std::size_t m = d * (d + 1) / 2;
  const double n = static_cast<double>(samples);
  std::array<double, kMaxDimension * kMaxDimension> a_buf{};
  std::array<double, kMaxDimension * kMaxDimension> work{};
  const std::span<double> a(a_buf.data(), d * d);

  // Pass 1: mean of the clipped matrices.
  std::vector<double> sum(d * d, 0.0);
  {
    RandomStream stream(seed, 0, stream_domain::estimation);
    for (std::size_t s = 0; s < samples; ++s) {
      draw_matrix(stream, a, work);
      for (std::size_t k = 0; k < d * d; ++k) sum[k] += a[k];
    }
  }
  DenseMatrix mean(d, d);
  for (std::size_t k = 0; k < d * d; ++k) mean.entries()[k] = sum[k] / n;
  mean = symmetrized(mean);

  // Pass 2: centred second moments over the upper-triangle entries, replaying
  // the same stream.
  std::vector<double> centred(m);
  std::vector<double> pair_sum(m * m, 0.0);
  std::vector<double> pair_sq(m * m, 0.0);
  {
    RandomStream stream(seed, 0, stream_domain::estimation);
    for (std::size_t s = 0; s < samples; ++s) {
      draw_matrix(stream, a, work);
      for (std::size_t i = 0, p = 0; i < d; ++i)
        for (std::size_t j = i; j < d; ++j, ++p)
          centred[p] = a[i * d + j] - mean(i, j);
      for (std::size_t p = 0; p < m; ++p) {
        for (std::size_t q = p; q < m; ++q) {
          const double u = centred[p] * centred[q];
          pair_sum[p * m + q] += u;
          pair_sq[p * m + q] += u * u;
        }
      }
    }
  }

  double max_se = 0.0;
  for (std::size_t p = 0; p < m; ++p) {
    for (std::size_t q = p; q < m; ++q) {
      const double mu1 = pair_sum[p * m + q] / n;
      const double var = std::max(0.0, pair_sq[p * m + q] / n - mu1 * mu1);
      max_se = std::max(max_se, std::sqrt(var / n));
    }
  }

  c.hessian_noise_tensor = DenseMatrix(d * d, d * d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t k = 0; k < d; ++k)
        for (std::size_t l = 0; l < d; ++l) {
          std::size_t p = upper_index(i, j, d);
          std::size_t q = upper_index(k, l, d);
          if (p > q) std::swap(p, q);
          c.hessian_noise_tensor(i * d + k, j * d + l) = pair_sum[p * m + q] / n;
        }

  mean_hessian_ = mean;
  const SymmetricEigen eig = symmetric_eigen(mean);
  c.mu = eig.values.front();
  c.L = eig.values.back();
  c.estimate = EstimateInfo{Provenance::monte_carlo, samples, max_se};
}

std::shared_ptr<const NoisyQuadratic> make_noisy_quadratic(
    std::size_t d, Vector spectrum, double hessian_noise_scale,
    const DenseMatrix& grad_noise_cov, std::uint64_t seed,
    NoisyQuadraticOptions options) {
  return std::make_shared<const NoisyQuadratic>(
      d, std::move(spectrum), hessian_noise_scale, grad_noise_cov, seed,
      std::move(options));
}

}  // namespace rootsgd
