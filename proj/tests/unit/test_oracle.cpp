#include <doctest.h>

#include <cmath>

#include "rootsgd/analysis.hpp"
#include "rootsgd/errors.hpp"
#include "rootsgd/problems.hpp"
#include "support.hpp"

using namespace rootsgd;
using testing::Gen;
using testing::max_abs_diff;
using testing::Moments;

namespace {

std::shared_ptr<const NoisyQuadratic> clipped_quadratic() {
  NoisyQuadraticOptions opts;
  opts.theta_star = {0.3, -0.2, 0.5};
  opts.rotate = true;
  opts.estimation_samples = 200'000;
  return make_noisy_quadratic(3, {0.5, 1.0, 2.0}, 0.2,
                              DenseMatrix::from_rows({{0.5, 0.1, 0}, {0.1, 0.3, 0}, {0, 0, 0.2}}),
                              5, opts);
}

std::shared_ptr<const NoisyQuadratic> analytic_quadratic() {
  NoisyQuadraticOptions opts;
  opts.theta_star = {1.0, -1.0};
  return make_noisy_quadratic(2, {1.0, 2.0}, 0.2, DenseMatrix::identity(2), 3, opts);
}

std::shared_ptr<const LinearRegression> linreg() {
  return make_linear_regression(2, DenseMatrix::diagonal(Vector{1.0, 2.0}), 1.0, {0.5, -1.0});
}

std::shared_ptr<const LogisticRegression> logreg() {
  LogisticRegressionOptions opts;
  opts.evaluation_samples = 100'000;
  return make_logistic_regression(2, DenseMatrix::from_rows({{1.0, 0.3}, {0.3, 0.8}}),
                                  {0.8, -0.5}, 0.1, 9, opts);
}

// Mean of stochastic gradients at theta must match grad F within 5 SE per
// coordinate.
void check_unbiased(const Problem& p, const Vector& theta, std::size_t n,
                    std::uint64_t seed) {
  const std::size_t d = p.dimension();
  std::vector<Moments> m(d);
  RandomStream stream(seed, 0, stream_domain::replicate);
  Sample xi;
  Vector g(d);
  for (std::size_t s = 0; s < n; ++s) {
    p.draw_into(stream, xi);
    p.grad_into(theta, xi, g);
    for (std::size_t i = 0; i < d; ++i) m[i].add(g[i]);
  }
  const Vector pop = p.population_grad(theta);
  for (std::size_t i = 0; i < d; ++i) {
    INFO(p.name(), " coordinate ", i);
    CHECK(std::abs(m[i].mean() - pop[i]) <= 5.0 * m[i].se() + 1e-12);
  }
}

void check_sigma_sq(const Problem& p, std::size_t n, std::uint64_t seed, double slack = 0.0) {
  const Vector& star = p.constants().theta_star;
  Moments m;
  RandomStream stream(seed, 0, stream_domain::replicate);
  Sample xi;
  Vector g(p.dimension());
  for (std::size_t s = 0; s < n; ++s) {
    p.draw_into(stream, xi);
    p.grad_into(star, xi, g);
    m.add(norm_sq(g));
  }
  INFO(p.name());
  CHECK(std::abs(m.mean() - p.constants().sigma_star_sq) <= 5.0 * m.se() + slack);
}

void check_constant_invariants(const Problem& p) {
  const ProblemConstants& c = p.constants();
  INFO(p.name());
  CHECK(c.mu > 0.0);
  CHECK(c.mu <= c.L);
  CHECK(is_symmetric(c.hessian_star));
  const SymmetricEigen h = symmetric_eigen(c.hessian_star);
  CHECK(h.values.front() >= c.mu - 1e-12);
  CHECK(h.values.back() <= c.L + 1e-12);
  CHECK(is_symmetric(c.noise_cov_star));
  CHECK(min_eigenvalue(c.noise_cov_star) >= -1e-12);
  CHECK(c.sigma_star_sq == doctest::Approx(c.noise_cov_star.trace()).epsilon(1e-12));
  CHECK(c.hessian_noise_tensor.rows() == c.dimension * c.dimension);
}

void check_finite_difference_hessian(const Problem& p, const Vector& theta,
                                     std::uint64_t seed) {
  RandomStream stream(seed, 0, stream_domain::replicate);
  const std::size_t d = p.dimension();
  for (int draw = 0; draw < 5; ++draw) {
    const Sample xi = p.draw(stream);
    const DenseMatrix h = p.stochastic_hessian(theta, xi);
    const double h_step = 1e-5;
    for (std::size_t j = 0; j < d; ++j) {
      Vector plus = theta, minus = theta;
      plus[j] += h_step;
      minus[j] -= h_step;
      const Vector gp = p.stochastic_grad(plus, xi);
      const Vector gm = p.stochastic_grad(minus, xi);
      for (std::size_t i = 0; i < d; ++i) {
        const double fd = (gp[i] - gm[i]) / (2.0 * h_step);
        INFO(p.name(), " entry ", i, ",", j);
        CHECK(std::abs(fd - h(i, j)) <= 1e-5 * (1.0 + std::abs(h(i, j))));
      }
    }
  }
}

}  // namespace

TEST_CASE("stochastic_grad closed forms") {
  auto q = make_noisy_quadratic(2, {1.0, 1.0}, 0.0, DenseMatrix::identity(2), 1);
  const Sample xi = NoisyQuadratic::make_sample(DenseMatrix::identity(2), Vector{0, 0});
  CHECK(q->stochastic_grad(Vector{1, 2}, xi) == Vector{1, 2});

  auto lr = make_linear_regression(2, DenseMatrix::identity(2), 1.0, {0, 0});
  const Sample s = LinearRegression::make_sample(Vector{1, 0}, 0.0);
  CHECK(lr->stochastic_grad(Vector{3, 5}, s) == Vector{3, 0});
}

TEST_CASE("population_grad closed forms") {
  auto q = make_noisy_quadratic(2, {1.0, 4.0}, 0.0, DenseMatrix::identity(2), 1,
                                NoisyQuadraticOptions{{2.0, -1.0}, false, 1000});
  CHECK(q->population_grad(Vector{3.0, 0.0}) == Vector{1, 4});
  CHECK(q->population_grad(Vector{2.0, -1.0}) == Vector{0, 0});
  for (const auto& p : std::vector<std::shared_ptr<const Problem>>{analytic_quadratic(), linreg()}) {
    CHECK(norm2(p->population_grad(p->constants().theta_star)) == 0.0);
  }
  auto lg = logreg();
  CHECK(norm2(lg->population_grad(lg->constants().theta_star)) <= 1e-9);
}

TEST_CASE("stochastic gradients are unbiased") {
  check_unbiased(*analytic_quadratic(), {0.2, 0.7}, 100'000, 1);
  check_unbiased(*clipped_quadratic(), {1.0, 0.0, -1.0}, 100'000, 2);
  check_unbiased(*linreg(), {1.5, 0.5}, 100'000, 3);
  // The logistic population gradient is a frozen-sample average, so the
  // comparison carries that sample's own error as well.
  auto lg = logreg();
  check_unbiased(*lg, lg->constants().theta_star, 100'000, 4);
}

TEST_CASE("noise_at has zero second moment on a deterministic problem") {
  auto q = testing::deterministic_quadratic({1.0, 3.0});
  RandomStream stream(1);
  Gen gen(2);
  for (int k = 0; k < 10; ++k) {
    const Sample xi = q->draw(stream);
    CHECK(norm2(q->noise_at(gen.vector(2), xi)) == 0.0);
  }
}

TEST_CASE("noise_at is linear in theta on the noisy quadratic") {
  auto q = clipped_quadratic();
  RandomStream stream(3);
  Gen gen(4);
  for (int k = 0; k < 20; ++k) {
    const Sample xi = q->draw(stream);
    const Vector t1 = gen.vector(3), t2 = gen.vector(3);
    const Vector lhs = subtract(q->noise_at(t1, xi), q->noise_at(t2, xi));
    const DenseMatrix xi_dev = q->sample_matrix(xi) - q->mean_hessian();
    const Vector rhs = matvec(xi_dev, subtract(t1, t2));
    CHECK(max_abs_diff(lhs, rhs) < 1e-12);
  }
}

TEST_CASE("sigma star squared matches Monte Carlo") {
  check_sigma_sq(*analytic_quadratic(), 100'000, 5);
  check_sigma_sq(*clipped_quadratic(), 100'000, 6);
  check_sigma_sq(*linreg(), 100'000, 7);
  check_sigma_sq(*make_linear_regression(2, DenseMatrix::diagonal(Vector{1.0, 4.0}), 0.5,
                                         {1.0, 1.0}),
                 100'000, 8);
}

TEST_CASE("constants satisfy their invariants") {
  check_constant_invariants(*analytic_quadratic());
  check_constant_invariants(*clipped_quadratic());
  check_constant_invariants(*linreg());
  check_constant_invariants(*logreg());
}

TEST_CASE("stochastic_hessian matches finite differences") {
  check_finite_difference_hessian(*clipped_quadratic(), {0.1, 0.2, 0.3}, 1);
  check_finite_difference_hessian(*linreg(), {0.1, 0.2}, 2);
  check_finite_difference_hessian(*logreg(), {0.4, -0.3}, 3);
}

TEST_CASE("stochastic_hessian closed forms") {
  auto q = clipped_quadratic();
  RandomStream stream(5);
  const Sample xi = q->draw(stream);
  CHECK(q->stochastic_hessian(Vector{0, 0, 0}, xi) ==
        q->stochastic_hessian(Vector{5, -3, 1}, xi));

  auto lr = linreg();
  const Sample s = LinearRegression::make_sample(Vector{1, 2}, 0.0);
  CHECK(lr->stochastic_hessian(Vector{0, 0}, s) == DenseMatrix::from_rows({{1, 2}, {2, 4}}));
}

TEST_CASE("noisy quadratic construction") {
  auto scalar = make_noisy_quadratic(1, {1.0}, 0.0, DenseMatrix::identity(1), 1);
  CHECK(scalar->constants().mu == 1.0);
  CHECK(scalar->constants().L == 1.0);
  CHECK(scalar->constants().sigma_star_sq == 1.0);

  auto two = make_noisy_quadratic(2, {1.0, 4.0}, 0.0, DenseMatrix::identity(2), 1,
                                  NoisyQuadraticOptions{{}, true, 1000});
  const DenseMatrix& h = two->constants().hessian_star;
  // Roots of lambda^2 - tr(H) lambda + det(H).
  const double tr = h.trace();
  const double det = h(0, 0) * h(1, 1) - h(0, 1) * h(1, 0);
  const double disc = std::sqrt(tr * tr - 4.0 * det);
  CHECK((tr - disc) / 2.0 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((tr + disc) / 2.0 == doctest::Approx(4.0).epsilon(1e-12));

  CHECK_THROWS_AS(make_noisy_quadratic(2, {1.0}, 0.0, DenseMatrix::identity(2), 1),
                  InvalidArgument);
  CHECK_THROWS_AS(make_noisy_quadratic(2, {1.0, -1.0}, 0.0, DenseMatrix::identity(2), 1),
                  InvalidArgument);
  CHECK_THROWS_AS(make_noisy_quadratic(2, {1.0, 1.0}, 0.0, DenseMatrix::identity(3), 1),
                  DimensionMismatch);
  CHECK_THROWS_AS(make_noisy_quadratic(0, {}, 0.0, DenseMatrix(), 1), InvalidArgument);
}

TEST_CASE("noisy quadratic analytic tensor matches Monte Carlo") {
  auto q = analytic_quadratic();
  REQUIRE_FALSE(q->clipping_possible());
  REQUIRE(q->constants().estimate.provenance == Provenance::analytic);
  const std::size_t d = 2;
  std::vector<Moments> m(d * d * d * d);
  RandomStream stream(10);
  for (int s = 0; s < 100'000; ++s) {
    const DenseMatrix xi = q->sample_matrix(q->draw(stream)) - q->mean_hessian();
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j)
        for (std::size_t k = 0; k < d; ++k)
          for (std::size_t l = 0; l < d; ++l)
            m[((i * d + j) * d + k) * d + l].add(xi(i, j) * xi(k, l));
  }
  const DenseMatrix& t = q->constants().hessian_noise_tensor;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t k = 0; k < d; ++k)
        for (std::size_t l = 0; l < d; ++l) {
          const Moments& mm = m[((i * d + j) * d + k) * d + l];
          CHECK(std::abs(t(i * d + k, j * d + l) - mm.mean()) <= 5.0 * mm.se() + 1e-12);
        }
  // l_Xi^2 = c^2 d / 3.
  CHECK(*q->constants().noise_lipschitz ==
        doctest::Approx(std::sqrt(0.04 * 2.0 / 3.0)).epsilon(1e-12));
}

TEST_CASE("clipped noisy quadratic keeps every draw above the floor") {
  auto q = clipped_quadratic();
  REQUIRE(q->clipping_possible());
  CHECK(q->constants().estimate.provenance == Provenance::monte_carlo);
  CHECK(q->constants().estimate.sample_count == 200'000);
  RandomStream stream(11);
  for (int s = 0; s < 2000; ++s) {
    const DenseMatrix a = q->sample_matrix(q->draw(stream));
    CHECK(is_symmetric(a));
    CHECK(min_eigenvalue(a) >= 0.25 - 1e-10);
  }
}

TEST_CASE("clipped noisy quadratic mean Hessian matches an independent estimate") {
  auto q = clipped_quadratic();
  const std::size_t d = 3;
  std::vector<Moments> m(d * d);
  RandomStream stream(12);
  for (int s = 0; s < 100'000; ++s) {
    const DenseMatrix a = q->sample_matrix(q->draw(stream));
    for (std::size_t k = 0; k < d * d; ++k) m[k].add(a.entries()[k]);
  }
  // Both sides carry Monte Carlo error; the reported mean used 2e5 samples.
  for (std::size_t k = 0; k < d * d; ++k) {
    const double se = m[k].se() * std::sqrt(1.0 + 0.5);
    CHECK(std::abs(q->mean_hessian().entries()[k] - m[k].mean()) <= 5.0 * se + 1e-12);
  }
}

TEST_CASE("linear regression constants") {
  auto id = make_linear_regression(2, DenseMatrix::identity(2), 1.0, {0, 0});
  CHECK(max_abs_diff(id->constants().hessian_star, DenseMatrix::identity(2)) == 0.0);
  CHECK(max_abs_diff(id->constants().noise_cov_star, DenseMatrix::identity(2)) < 1e-15);
  const DenseMatrix cr =
      cramer_rao(id->constants().hessian_star, id->constants().noise_cov_star);
  CHECK(max_abs_diff(cr, DenseMatrix::identity(2)) < 1e-15);

  auto lr = make_linear_regression(2, DenseMatrix::diagonal(Vector{1.0, 4.0}), 0.5, {0, 0});
  CHECK(max_abs_diff(lr->constants().noise_cov_star,
                     DenseMatrix::diagonal(Vector{0.25, 1.0})) < 1e-15);

  // l_Xi^2 = lambda_max(tr(S) S + S^2) = 3 * 2 + 4 for S = diag(1, 2).
  auto d12 = linreg();
  CHECK(*d12->constants().noise_lipschitz == doctest::Approx(std::sqrt(10.0)).epsilon(1e-12));
  CHECK_FALSE(d12->constants().individual_smoothness.has_value());
  CHECK(d12->constants().mu == doctest::Approx(1.0));
  CHECK(d12->constants().L == doctest::Approx(2.0));

  CHECK_THROWS(make_linear_regression(3, DenseMatrix::identity(2), 1.0, {0, 0}));
  CHECK_THROWS(make_linear_regression(2, DenseMatrix::identity(2), -1.0, {0, 0}));
}

TEST_CASE("linear regression tensor matches Monte Carlo") {
  auto lr = make_linear_regression(2, DenseMatrix::from_rows({{1.0, 0.4}, {0.4, 2.0}}), 1.0,
                                   {0, 0});
  const std::size_t d = 2;
  const DenseMatrix& h = lr->constants().hessian_star;
  std::vector<Moments> m(16);
  RandomStream stream(13);
  for (int s = 0; s < 200'000; ++s) {
    const DenseMatrix xi = lr->stochastic_hessian(Vector{0, 0}, lr->draw(stream)) - h;
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j)
        for (std::size_t k = 0; k < d; ++k)
          for (std::size_t l = 0; l < d; ++l)
            m[((i * d + j) * d + k) * d + l].add(xi(i, j) * xi(k, l));
  }
  const DenseMatrix& t = lr->constants().hessian_noise_tensor;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t k = 0; k < d; ++k)
        for (std::size_t l = 0; l < d; ++l) {
          const Moments& mm = m[((i * d + j) * d + k) * d + l];
          CHECK(std::abs(t(i * d + k, j * d + l) - mm.mean()) <= 5.0 * mm.se());
        }
}

TEST_CASE("logistic regression symmetric instance") {
  LogisticRegressionOptions opts;
  opts.evaluation_samples = 400'000;
  auto lg = make_logistic_regression(1, DenseMatrix::identity(1), {0.0}, 1.0, 21, opts);
  const ProblemConstants& c = lg->constants();
  CHECK(c.mu == 1.0);
  CHECK(std::abs(c.theta_star[0]) < 5e-3);
  // H* = ridge + E[x^2 / 4] = 1.25; the frozen-sample SE of mean(x^2)/4 is
  // sqrt(2/n)/4.
  CHECK(std::abs(c.hessian_star(0, 0) - 1.25) <= 5.0 * std::sqrt(2.0 / 400'000.0) / 4.0 + 1e-3);
  CHECK(norm2(lg->population_grad(c.theta_star)) <= 1e-9);
  CHECK(c.estimate.provenance == Provenance::monte_carlo);
}

TEST_CASE("logistic regression reports ridge as mu") {
  auto lg = logreg();
  CHECK(lg->constants().mu == 0.1);
  CHECK(lg->constants().L > lg->constants().mu);
  CHECK(lg->newton_iterations() > 0);
}

TEST_CASE("draws are reproducible per stream") {
  auto q = clipped_quadratic();
  RandomStream a(99, 3, stream_domain::replicate);
  RandomStream b(99, 3, stream_domain::replicate);
  RandomStream c(99, 4, stream_domain::replicate);
  const Sample sa = q->draw(a), sb = q->draw(b), sc = q->draw(c);
  CHECK(sa.values == sb.values);
  CHECK(sa.values != sc.values);
}

TEST_CASE("dimension errors on gradient calls") {
  auto lr = linreg();
  RandomStream stream(1);
  const Sample xi = lr->draw(stream);
  CHECK_THROWS_AS(lr->stochastic_grad(Vector{1, 2, 3}, xi), DimensionMismatch);
  CHECK_THROWS_AS(lr->population_grad(Vector{1}), DimensionMismatch);
}
