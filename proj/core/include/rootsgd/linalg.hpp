#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace rootsgd {

using Vector = std::vector<double>;

/// Dense row-major matrix. Sizes in this library stay small (d <= 20, so the
/// flattened covariance systems are at most 400 x 400).
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> entries);

  static DenseMatrix identity(std::size_t n);
  static DenseMatrix diagonal(std::span<const double> diag);
  static DenseMatrix from_rows(
      std::initializer_list<std::initializer_list<double>> rows);
  static DenseMatrix outer(std::span<const double> x, std::span<const double> y);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool is_square() const { return rows_ == cols_; }
  bool empty() const { return entries_.empty(); }

  double operator()(std::size_t i, std::size_t j) const {
    return entries_[i * cols_ + j];
  }
  double& operator()(std::size_t i, std::size_t j) {
    return entries_[i * cols_ + j];
  }

  std::span<const double> entries() const { return entries_; }
  std::span<double> entries() { return entries_; }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(entries_).subspan(i * cols_, cols_);
  }

  DenseMatrix transpose() const;
  double trace() const;
  double max_abs() const;
  Vector diag() const;

  DenseMatrix& operator+=(const DenseMatrix& other);
  DenseMatrix& operator-=(const DenseMatrix& other);
  DenseMatrix& operator*=(double scale);

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> entries_;
};

DenseMatrix operator+(DenseMatrix a, const DenseMatrix& b);
DenseMatrix operator-(DenseMatrix a, const DenseMatrix& b);
DenseMatrix operator*(double scale, DenseMatrix a);
DenseMatrix operator*(const DenseMatrix& a, const DenseMatrix& b);

Vector matvec(const DenseMatrix& a, std::span<const double> x);
void matvec_into(const DenseMatrix& a, std::span<const double> x,
                 std::span<double> out);

// Vector kernels.
double dot(std::span<const double> x, std::span<const double> y);
double norm_sq(std::span<const double> x);
double norm2(std::span<const double> x);
double distance_sq(std::span<const double> x, std::span<const double> y);
Vector subtract(std::span<const double> x, std::span<const double> y);
Vector add(std::span<const double> x, std::span<const double> y);
Vector scaled(std::span<const double> x, double scale);

double frobenius_norm(const DenseMatrix& a);
double frobenius_distance(const DenseMatrix& a, const DenseMatrix& b);

/// Largest |a_ij - a_ji|; throws on non-square input.
double asymmetry(const DenseMatrix& a);
/// max |a_ij - a_ji| <= 1e-12 * (1 + max |a_ij|).
bool is_symmetric(const DenseMatrix& a);
/// Throws InvalidArgument naming `what` unless is_symmetric(a).
void require_symmetric(const DenseMatrix& a, const char* what);
DenseMatrix symmetrized(const DenseMatrix& a);

/// Partial-pivoted LU factorization. Singular when a pivot falls below
/// 1e-14 times the largest initial |entry|.
class LuDecomposition {
 public:
  explicit LuDecomposition(DenseMatrix a);

  std::size_t size() const { return lu_.rows(); }
  Vector solve(std::span<const double> b) const;

 private:
  DenseMatrix lu_;
  std::vector<std::size_t> perm_;
};

Vector solve_dense(const DenseMatrix& a, std::span<const double> b);
/// Solves a X = b column by column.
DenseMatrix solve_dense(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix inverse(const DenseMatrix& a);

/// kron(a, b)[i*p + k, j*q + l] = a[i, j] * b[k, l].
DenseMatrix kron(const DenseMatrix& a, const DenseMatrix& b);

/// Column-stacking vectorization: vec(x)[j*rows + i] = x[i, j]. With this
/// convention vec(b x a^T) = kron(a, b) vec(x).
Vector vec(const DenseMatrix& x);
DenseMatrix unvec(std::span<const double> v, std::size_t rows, std::size_t cols);

struct SymmetricEigen {
  Vector values;        // ascending
  DenseMatrix vectors;  // column k pairs with values[k]
};

/// Cyclic Jacobi eigensolver for symmetric matrices.
SymmetricEigen symmetric_eigen(const DenseMatrix& a);
double min_eigenvalue(const DenseMatrix& a);
double max_eigenvalue(const DenseMatrix& a);

/// Lower-triangular Cholesky factor; throws SingularMatrix unless positive
/// definite.
DenseMatrix cholesky(const DenseMatrix& a);
/// In-place attempt used on hot paths; returns false when a is not
/// positive definite. Only the lower triangle of `work` is meaningful after.
bool try_cholesky_in_place(std::span<double> work, std::size_t n);

/// Symmetric square-root factor W with W W^T = a for positive semidefinite a
/// (negative round-off eigenvalues are clamped to zero).
DenseMatrix psd_factor(const DenseMatrix& a);

}  // namespace rootsgd
