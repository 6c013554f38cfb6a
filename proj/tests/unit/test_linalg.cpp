#include <doctest.h>

#include <cmath>

#include "rootsgd/errors.hpp"
#include "rootsgd/linalg.hpp"
#include "support.hpp"

using namespace rootsgd;
using testing::Gen;
using testing::max_abs_diff;

TEST_CASE("solve_dense small systems") {
  CHECK(solve_dense(DenseMatrix::identity(2), Vector{3, 4}) == Vector{3, 4});

  const Vector x = solve_dense(DenseMatrix::from_rows({{2, 0}, {0, 4}}), Vector{2, 8});
  CHECK(x[0] == doctest::Approx(1.0));
  CHECK(x[1] == doctest::Approx(2.0));

  const DenseMatrix a = DenseMatrix::from_rows({{1, 1}, {0, 1}});
  const Vector y = solve_dense(a, Vector{3, 1});
  CHECK(y[0] == doctest::Approx(2.0));
  CHECK(y[1] == doctest::Approx(1.0));
  const Vector back = matvec(a, y);
  CHECK(back[0] == doctest::Approx(3.0));
  CHECK(back[1] == doctest::Approx(1.0));
}

TEST_CASE("solve_dense rejects singular and mismatched input") {
  CHECK_THROWS_AS(solve_dense(DenseMatrix::from_rows({{1, 2}, {2, 4}}), Vector{1, 1}),
                  SingularMatrix);
  CHECK_THROWS_AS(solve_dense(DenseMatrix::identity(2), Vector{1, 2, 3}), DimensionMismatch);
  CHECK_THROWS_AS(solve_dense(DenseMatrix(2, 3), Vector{1, 2}), DimensionMismatch);
}

TEST_CASE("solve_dense residual on random systems") {
  Gen gen(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = gen.index(1, 30);
    DenseMatrix a = gen.matrix(n, n);
    for (std::size_t i = 0; i < n; ++i) a(i, i) += static_cast<double>(n);
    const Vector b = gen.vector(n);
    const Vector x = solve_dense(a, b);
    const Vector r = subtract(matvec(a, x), b);
    CHECK(norm2(r) <= 1e-12 * (1.0 + norm2(b)) * static_cast<double>(n));
  }
}

TEST_CASE("inverse times matrix is the identity") {
  Gen gen(12);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = gen.index(1, 12);
    const DenseMatrix a = gen.spd(n, 0.5, 3.0);
    CHECK(max_abs_diff(inverse(a) * a, DenseMatrix::identity(n)) < 1e-12);
  }
}

TEST_CASE("kron examples") {
  CHECK(kron(DenseMatrix::identity(2), DenseMatrix::identity(2)) == DenseMatrix::identity(4));
  CHECK(kron(DenseMatrix::from_rows({{0, 1}, {0, 0}}), DenseMatrix::from_rows({{2}})) ==
        DenseMatrix::from_rows({{0, 2}, {0, 0}}));

  const DenseMatrix a = DenseMatrix::from_rows({{1, 2}, {3, 4}});
  const DenseMatrix b = DenseMatrix::from_rows({{0, 1}, {1, 0}});
  const DenseMatrix k = kron(a, b);
  REQUIRE(k.rows() == 4);
  REQUIRE(k.cols() == 4);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j)
      for (std::size_t p = 0; p < 2; ++p)
        for (std::size_t q = 0; q < 2; ++q) CHECK(k(i * 2 + p, j * 2 + q) == a(i, j) * b(p, q));
  CHECK(k == DenseMatrix::from_rows(
                 {{0, 1, 0, 2}, {1, 0, 2, 0}, {0, 3, 0, 4}, {3, 0, 4, 0}}));
}

TEST_CASE("vec of a product equals kron times vec") {
  Gen gen(13);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t m = gen.index(1, 5), n = gen.index(1, 5), p = gen.index(1, 5),
                      q = gen.index(1, 5);
    const DenseMatrix a = gen.matrix(q, n);  // acts on the right as a^T
    const DenseMatrix b = gen.matrix(p, m);
    const DenseMatrix x = gen.matrix(m, n);
    const Vector lhs = vec(b * x * a.transpose());
    const Vector rhs = matvec(kron(a, b), vec(x));
    CHECK(max_abs_diff(lhs, rhs) < 1e-12 * (1.0 + norm2(lhs)));
  }
}

TEST_CASE("vec and unvec are inverse") {
  Gen gen(14);
  const DenseMatrix x = gen.matrix(3, 4);
  const Vector v = vec(x);
  CHECK(v[1] == x(1, 0));
  CHECK(v[3] == x(0, 1));
  CHECK(unvec(v, 3, 4) == x);
  CHECK_THROWS_AS(unvec(v, 4, 4), DimensionMismatch);
}

TEST_CASE("symmetric_eigen reconstructs the matrix") {
  Gen gen(15);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = gen.index(1, 15);
    const DenseMatrix a = gen.symmetric(n);
    const SymmetricEigen e = symmetric_eigen(a);
    for (std::size_t k = 1; k < n; ++k) CHECK(e.values[k - 1] <= e.values[k]);
    const DenseMatrix recon =
        e.vectors * DenseMatrix::diagonal(e.values) * e.vectors.transpose();
    CHECK(max_abs_diff(recon, a) < 1e-11);
    CHECK(max_abs_diff(e.vectors.transpose() * e.vectors, DenseMatrix::identity(n)) < 1e-11);
    CHECK(min_eigenvalue(a) == e.values.front());
    CHECK(max_eigenvalue(a) == e.values.back());
  }
}

TEST_CASE("symmetric_eigen characteristic polynomial in 2d") {
  const DenseMatrix a = DenseMatrix::from_rows({{2, 1}, {1, 3}});
  const SymmetricEigen e = symmetric_eigen(a);
  // lambda^2 - 5 lambda + 5 = 0
  CHECK(e.values[0] == doctest::Approx((5.0 - std::sqrt(5.0)) / 2.0).epsilon(1e-14));
  CHECK(e.values[1] == doctest::Approx((5.0 + std::sqrt(5.0)) / 2.0).epsilon(1e-14));
}

TEST_CASE("cholesky and psd_factor") {
  Gen gen(16);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = gen.index(1, 10);
    const DenseMatrix a = gen.spd(n, 0.1, 5.0);
    const DenseMatrix l = cholesky(a);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) CHECK(l(i, j) == 0.0);
    CHECK(max_abs_diff(l * l.transpose(), a) < 1e-12);
    const DenseMatrix w = psd_factor(a);
    CHECK(max_abs_diff(w * w.transpose(), a) < 1e-11);
  }
  CHECK_THROWS_AS(cholesky(DenseMatrix::from_rows({{1, 2}, {2, 1}})), SingularMatrix);
  const DenseMatrix singular = DenseMatrix::from_rows({{1, 1}, {1, 1}});
  const DenseMatrix w = psd_factor(singular);
  CHECK(max_abs_diff(w * w.transpose(), singular) < 1e-12);
}

TEST_CASE("symmetry checks use the relative tolerance") {
  DenseMatrix a = DenseMatrix::from_rows({{1, 2}, {2, 1}});
  CHECK(is_symmetric(a));
  a(0, 1) += 1e-13;
  CHECK(is_symmetric(a));
  a(0, 1) += 1e-10;
  CHECK_FALSE(is_symmetric(a));
  CHECK_THROWS_AS(require_symmetric(a, "a"), InvalidArgument);
  CHECK(asymmetry(symmetrized(a)) == 0.0);
}

TEST_CASE("matrix shape errors") {
  CHECK_THROWS_AS(DenseMatrix(2, 2, std::vector<double>{1, 2, 3}), DimensionMismatch);
  CHECK_THROWS_AS(DenseMatrix(2, 3) * DenseMatrix(2, 3), DimensionMismatch);
  CHECK_THROWS_AS(DenseMatrix(2, 3).trace(), DimensionMismatch);
}

TEST_CASE("vector kernels") {
  const Vector x{1, 2, 2};
  const Vector y{0, 1, 0};
  CHECK(dot(x, y) == 2.0);
  CHECK(norm_sq(x) == 9.0);
  CHECK(norm2(x) == 3.0);
  CHECK(distance_sq(x, y) == 1.0 + 1.0 + 4.0);
  CHECK(add(x, y) == Vector{1, 3, 2});
  CHECK(subtract(x, y) == Vector{1, 1, 2});
  CHECK(scaled(x, 2.0) == Vector{2, 4, 4});
  CHECK(frobenius_norm(DenseMatrix::from_rows({{3, 0}, {0, 4}})) == 5.0);
}
