#include "rootsgd/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "rootsgd/errors.hpp"

namespace rootsgd {

namespace {

void require_same_shape(const DenseMatrix& a, const DenseMatrix& b,
                        const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionMismatch(std::string(op) + ": shape " +
                            std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()) + " vs " +
                            std::to_string(b.rows()) + "x" +
                            std::to_string(b.cols()));
  }
}

void require_same_length(std::span<const double> x, std::span<const double> y,
                         const char* op) {
  if (x.size() != y.size()) {
    throw DimensionMismatch(std::string(op) + ": length " +
                            std::to_string(x.size()) + " vs " +
                            std::to_string(y.size()));
  }
}

}  // namespace

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), entries_(rows * cols, fill) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols,
                         std::vector<double> entries)
    : rows_(rows), cols_(cols), entries_(std::move(entries)) {
  if (entries_.size() != rows_ * cols_) {
    throw DimensionMismatch("DenseMatrix: " + std::to_string(entries_.size()) +
                            " entries for a " + std::to_string(rows_) + "x" +
                            std::to_string(cols_) + " matrix");
  }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::diagonal(std::span<const double> diag) {
  DenseMatrix m(diag.size(), diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
  return m;
}

DenseMatrix DenseMatrix::from_rows(
    std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> entries;
  entries.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionMismatch("from_rows: ragged rows");
    entries.insert(entries.end(), row.begin(), row.end());
  }
  return DenseMatrix(r, c, std::move(entries));
}

DenseMatrix DenseMatrix::outer(std::span<const double> x,
                               std::span<const double> y) {
  DenseMatrix m(x.size(), y.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < y.size(); ++j) m(i, j) = x[i] * y[j];
  return m;
}

DenseMatrix DenseMatrix::transpose() const {
  DenseMatrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

double DenseMatrix::trace() const {
  if (!is_square()) throw DimensionMismatch("trace of a non-square matrix");
  double s = 0.0;
  for (std::size_t i = 0; i < rows_; ++i) s += (*this)(i, i);
  return s;
}

double DenseMatrix::max_abs() const {
  double m = 0.0;
  for (double e : entries_) m = std::max(m, std::abs(e));
  return m;
}

Vector DenseMatrix::diag() const {
  Vector d(std::min(rows_, cols_));
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = (*this)(i, i);
  return d;
}

DenseMatrix& DenseMatrix::operator+=(const DenseMatrix& other) {
  require_same_shape(*this, other, "operator+=");
  for (std::size_t k = 0; k < entries_.size(); ++k)
    entries_[k] += other.entries_[k];
  return *this;
}

DenseMatrix& DenseMatrix::operator-=(const DenseMatrix& other) {
  require_same_shape(*this, other, "operator-=");
  for (std::size_t k = 0; k < entries_.size(); ++k)
    entries_[k] -= other.entries_[k];
  return *this;
}

DenseMatrix& DenseMatrix::operator*=(double scale) {
  for (double& e : entries_) e *= scale;
  return *this;
}

DenseMatrix operator+(DenseMatrix a, const DenseMatrix& b) { return a += b; }
DenseMatrix operator-(DenseMatrix a, const DenseMatrix& b) { return a -= b; }
DenseMatrix operator*(double scale, DenseMatrix a) { return a *= scale; }

DenseMatrix operator*(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) {
    throw DimensionMismatch("matmul: inner dimensions " +
                            std::to_string(a.cols()) + " vs " +
                            std::to_string(b.rows()));
  }
  DenseMatrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  }
  return c;
}

void matvec_into(const DenseMatrix& a, std::span<const double> x,
                 std::span<double> out) {
  if (a.cols() != x.size() || a.rows() != out.size()) {
    throw DimensionMismatch("matvec: " + std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()) + " times length " +
                            std::to_string(x.size()));
  }
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto r = a.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < r.size(); ++j) s += r[j] * x[j];
    out[i] = s;
  }
}

Vector matvec(const DenseMatrix& a, std::span<const double> x) {
  Vector out(a.rows());
  matvec_into(a, x, out);
  return out;
}

double dot(std::span<const double> x, std::span<const double> y) {
  require_same_length(x, y, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

double norm_sq(std::span<const double> x) {
  double s = 0.0;
  for (double e : x) s += e * e;
  return s;
}

double norm2(std::span<const double> x) { return std::sqrt(norm_sq(x)); }

double distance_sq(std::span<const double> x, std::span<const double> y) {
  require_same_length(x, y, "distance_sq");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    s += d * d;
  }
  return s;
}

Vector subtract(std::span<const double> x, std::span<const double> y) {
  require_same_length(x, y, "subtract");
  Vector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
  return out;
}

Vector add(std::span<const double> x, std::span<const double> y) {
  require_same_length(x, y, "add");
  Vector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
  return out;
}

Vector scaled(std::span<const double> x, double scale) {
  Vector out(x.begin(), x.end());
  for (double& e : out) e *= scale;
  return out;
}

double frobenius_norm(const DenseMatrix& a) { return norm2(a.entries()); }

double frobenius_distance(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_shape(a, b, "frobenius_distance");
  return std::sqrt(distance_sq(a.entries(), b.entries()));
}

double asymmetry(const DenseMatrix& a) {
  if (!a.is_square()) throw DimensionMismatch("asymmetry: non-square matrix");
  double m = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = i + 1; j < a.cols(); ++j)
      m = std::max(m, std::abs(a(i, j) - a(j, i)));
  return m;
}

bool is_symmetric(const DenseMatrix& a) {
  return a.is_square() && asymmetry(a) <= 1e-12 * (1.0 + a.max_abs());
}

void require_symmetric(const DenseMatrix& a, const char* what) {
  if (!a.is_square()) {
    throw DimensionMismatch(std::string(what) + " must be square");
  }
  if (!is_symmetric(a)) {
    throw InvalidArgument(std::string(what) + " is not symmetric (asymmetry " +
                          std::to_string(asymmetry(a)) + ")");
  }
}

DenseMatrix symmetrized(const DenseMatrix& a) {
  DenseMatrix s = a;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = i + 1; j < a.cols(); ++j)
      s(i, j) = s(j, i) = 0.5 * (a(i, j) + a(j, i));
  return s;
}

LuDecomposition::LuDecomposition(DenseMatrix a) : lu_(std::move(a)) {
  if (!lu_.is_square() || lu_.rows() == 0) {
    throw DimensionMismatch("LU: matrix must be square and non-empty");
  }
  const std::size_t n = lu_.rows();
  const double threshold = 1e-14 * lu_.max_abs();
  perm_.resize(n);
  std::iota(perm_.begin(), perm_.end(), std::size_t{0});

  for (std::size_t k = 0; k < n; ++k) {
    std::size_t pivot = k;
    double best = std::abs(lu_(k, k));
    for (std::size_t i = k + 1; i < n; ++i) {
      if (std::abs(lu_(i, k)) > best) {
        best = std::abs(lu_(i, k));
        pivot = i;
      }
    }
    if (best <= threshold || best == 0.0) {
      throw SingularMatrix("LU: pivot " + std::to_string(best) +
                           " below threshold at column " + std::to_string(k));
    }
    if (pivot != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(lu_(k, j), lu_(pivot, j));
      std::swap(perm_[k], perm_[pivot]);
    }
    const double inv = 1.0 / lu_(k, k);
    for (std::size_t i = k + 1; i < n; ++i) {
      const double factor = lu_(i, k) * inv;
      lu_(i, k) = factor;
      if (factor == 0.0) continue;
      for (std::size_t j = k + 1; j < n; ++j) lu_(i, j) -= factor * lu_(k, j);
    }
  }
}

Vector LuDecomposition::solve(std::span<const double> b) const {
  const std::size_t n = size();
  if (b.size() != n) {
    throw DimensionMismatch("LU solve: rhs length " + std::to_string(b.size()) +
                            " for system of size " + std::to_string(n));
  }
  Vector x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = b[perm_[i]];
  for (std::size_t i = 0; i < n; ++i) {
    double s = x[i];
    for (std::size_t j = 0; j < i; ++j) s -= lu_(i, j) * x[j];
    x[i] = s;
  }
  for (std::size_t i = n; i-- > 0;) {
    double s = x[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= lu_(i, j) * x[j];
    x[i] = s / lu_(i, i);
  }
  return x;
}

Vector solve_dense(const DenseMatrix& a, std::span<const double> b) {
  return LuDecomposition(a).solve(b);
}

DenseMatrix solve_dense(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows()) {
    throw DimensionMismatch("solve_dense: rhs has " + std::to_string(b.rows()) +
                            " rows, system has " + std::to_string(a.rows()));
  }
  const LuDecomposition lu(a);
  DenseMatrix x(a.cols(), b.cols());
  Vector column(b.rows());
  for (std::size_t j = 0; j < b.cols(); ++j) {
    for (std::size_t i = 0; i < b.rows(); ++i) column[i] = b(i, j);
    const Vector sol = lu.solve(column);
    for (std::size_t i = 0; i < sol.size(); ++i) x(i, j) = sol[i];
  }
  return x;
}

DenseMatrix inverse(const DenseMatrix& a) {
  return solve_dense(a, DenseMatrix::identity(a.rows()));
}

DenseMatrix kron(const DenseMatrix& a, const DenseMatrix& b) {
  const std::size_t p = b.rows();
  const std::size_t q = b.cols();
  DenseMatrix k(a.rows() * p, a.cols() * q);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) {
      const double aij = a(i, j);
      for (std::size_t r = 0; r < p; ++r)
        for (std::size_t c = 0; c < q; ++c) k(i * p + r, j * q + c) = aij * b(r, c);
    }
  return k;
}

Vector vec(const DenseMatrix& x) {
  Vector v(x.rows() * x.cols());
  for (std::size_t j = 0; j < x.cols(); ++j)
    for (std::size_t i = 0; i < x.rows(); ++i) v[j * x.rows() + i] = x(i, j);
  return v;
}

DenseMatrix unvec(std::span<const double> v, std::size_t rows,
                  std::size_t cols) {
  if (v.size() != rows * cols) {
    throw DimensionMismatch("unvec: length " + std::to_string(v.size()) +
                            " for a " + std::to_string(rows) + "x" +
                            std::to_string(cols) + " matrix");
  }
  DenseMatrix x(rows, cols);
  for (std::size_t j = 0; j < cols; ++j)
    for (std::size_t i = 0; i < rows; ++i) x(i, j) = v[j * rows + i];
  return x;
}

SymmetricEigen symmetric_eigen(const DenseMatrix& a) {
  require_symmetric(a, "symmetric_eigen input");
  const std::size_t n = a.rows();
  DenseMatrix m = symmetrized(a);
  DenseMatrix v = DenseMatrix::identity(n);

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += m(i, j) * m(i, j);
    if (off <= 1e-30 * std::max(1.0, norm_sq(m.entries()))) break;

    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = m(p, q);
        if (apq == 0.0) continue;
        const double theta = (m(q, q) - m(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double mkp = m(k, p);
          const double mkq = m(k, q);
          m(k, p) = c * mkp - s * mkq;
          m(k, q) = s * mkp + c * mkq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double mpk = m(p, k);
          const double mqk = m(q, k);
          m(p, k) = c * mpk - s * mqk;
          m(q, k) = s * mpk + c * mqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t x, std::size_t y) { return m(x, x) < m(y, y); });
  SymmetricEigen out{Vector(n), DenseMatrix(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = m(order[k], order[k]);
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
  }
  return out;
}

double min_eigenvalue(const DenseMatrix& a) {
  return symmetric_eigen(a).values.front();
}

double max_eigenvalue(const DenseMatrix& a) {
  return symmetric_eigen(a).values.back();
}

bool try_cholesky_in_place(std::span<double> work, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) {
    double diag = work[j * n + j];
    for (std::size_t k = 0; k < j; ++k) diag -= work[j * n + k] * work[j * n + k];
    if (!(diag > 0.0)) return false;
    const double ljj = std::sqrt(diag);
    work[j * n + j] = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = work[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= work[i * n + k] * work[j * n + k];
      work[i * n + j] = s / ljj;
    }
  }
  return true;
}

DenseMatrix cholesky(const DenseMatrix& a) {
  require_symmetric(a, "cholesky input");
  DenseMatrix l = a;
  if (!try_cholesky_in_place(l.entries(), l.rows())) {
    throw SingularMatrix("cholesky: matrix is not positive definite");
  }
  for (std::size_t i = 0; i < l.rows(); ++i)
    for (std::size_t j = i + 1; j < l.cols(); ++j) l(i, j) = 0.0;
  return l;
}

DenseMatrix psd_factor(const DenseMatrix& a) {
  const SymmetricEigen eig = symmetric_eigen(a);
  const std::size_t n = a.rows();
  const double tol = 1e-12 * std::max(1.0, a.max_abs());
  DenseMatrix w(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    if (eig.values[k] < -tol) {
      throw InvalidArgument("psd_factor: matrix has eigenvalue " +
                            std::to_string(eig.values[k]));
    }
    const double root = std::sqrt(std::max(eig.values[k], 0.0));
    for (std::size_t i = 0; i < n; ++i) w(i, k) = eig.vectors(i, k) * root;
  }
  return w;
}

}  // namespace rootsgd
