#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <vector>

#include "rootsgd/linalg.hpp"
#include "rootsgd/problem.hpp"
#include "rootsgd/problems.hpp"

namespace testing {

using rootsgd::DenseMatrix;
using rootsgd::Vector;

// Hand-rolled generators for the property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }
  std::size_t index(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(engine_);
  }

  Vector vector(std::size_t n, double scale = 1.0) {
    Vector v(n);
    for (double& x : v) x = scale * normal();
    return v;
  }

  DenseMatrix matrix(std::size_t r, std::size_t c) {
    DenseMatrix m(r, c);
    for (double& x : m.entries()) x = normal();
    return m;
  }

  DenseMatrix symmetric(std::size_t n) {
    DenseMatrix m = matrix(n, n);
    return rootsgd::symmetrized(m);
  }

  // SPD with eigenvalues in [lo, hi].
  DenseMatrix spd(std::size_t n, double lo, double hi) {
    const DenseMatrix q = orthogonal(n);
    Vector eig(n);
    for (double& e : eig) e = uniform(lo, hi);
    return rootsgd::symmetrized(q * DenseMatrix::diagonal(eig) * q.transpose());
  }

  DenseMatrix orthogonal(std::size_t n) {
    DenseMatrix q = matrix(n, n);
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < j; ++k) {
        double p = 0.0;
        for (std::size_t i = 0; i < n; ++i) p += q(i, k) * q(i, j);
        for (std::size_t i = 0; i < n; ++i) q(i, j) -= p * q(i, k);
      }
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += q(i, j) * q(i, j);
      s = std::sqrt(s);
      for (std::size_t i = 0; i < n; ++i) q(i, j) /= s;
    }
    return q;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

inline double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.entries().size(); ++i)
    m = std::max(m, std::abs(a.entries()[i] - b.entries()[i]));
  return m;
}

inline double max_abs_diff(const Vector& a, const Vector& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Running mean and standard error.
struct Moments {
  double sum = 0.0;
  double sq = 0.0;
  std::size_t n = 0;

  void add(double x) {
    sum += x;
    sq += x * x;
    ++n;
  }
  double mean() const { return sum / static_cast<double>(n); }
  double se() const {
    const double m = mean();
    const double var = (sq - static_cast<double>(n) * m * m) / static_cast<double>(n - 1);
    return std::sqrt(std::max(0.0, var) / static_cast<double>(n));
  }
};

// Forwards to another problem and counts draws. Can hide the Hessian.
class CountingProblem final : public rootsgd::Problem {
 public:
  CountingProblem(std::shared_ptr<const rootsgd::Problem> inner, bool expose_hessian = true)
      : Problem(inner->constants()), inner_(std::move(inner)), expose_hessian_(expose_hessian) {}

  std::string_view name() const override { return "counting"; }
  bool has_hessian() const override { return expose_hessian_ && inner_->has_hessian(); }

  void draw_into(rootsgd::RandomStream& stream, rootsgd::Sample& out) const override {
    draws_.fetch_add(1);
    inner_->draw_into(stream, out);
  }
  void grad_into(std::span<const double> theta, const rootsgd::Sample& xi,
                 std::span<double> out) const override {
    inner_->grad_into(theta, xi, out);
  }
  void population_grad_into(std::span<const double> theta,
                            std::span<double> out) const override {
    inner_->population_grad_into(theta, out);
  }

  std::size_t draws() const { return draws_.load(); }

 protected:
  DenseMatrix hessian_impl(std::span<const double> theta,
                           const rootsgd::Sample& xi) const override {
    if (!expose_hessian_) return Problem::hessian_impl(theta, xi);
    return inner_->stochastic_hessian(theta, xi);
  }

 private:
  std::shared_ptr<const rootsgd::Problem> inner_;
  bool expose_hessian_;
  mutable std::atomic<std::size_t> draws_{0};
};

// f = 1/2 theta^T diag(spectrum) theta with no noise at all.
inline std::shared_ptr<const rootsgd::NoisyQuadratic> deterministic_quadratic(
    const Vector& spectrum, Vector theta_star = {}) {
  const std::size_t d = spectrum.size();
  rootsgd::NoisyQuadraticOptions opts;
  opts.theta_star = std::move(theta_star);
  return rootsgd::make_noisy_quadratic(d, spectrum, 0.0, DenseMatrix(d, d), 1, opts);
}

}  // namespace testing
