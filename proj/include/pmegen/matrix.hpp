#pragma once

// Small dense row-major matrices and the reference solvers the oracle uses.
// Desk-scale only: no blocking, no pivoting beyond partial pivoting.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "pmegen/errors.hpp"

namespace pmegen {

class Matrix {
public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : r_(rows), c_(cols), a_(rows * cols, fill) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const noexcept { return r_; }
  std::size_t cols() const noexcept { return c_; }
  double& operator()(std::size_t i, std::size_t j) { return a_[i * c_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a_[i * c_ + j]; }

  Matrix transpose() const {
    Matrix t(c_, r_);
    for (std::size_t i = 0; i < r_; ++i)
      for (std::size_t j = 0; j < c_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  Matrix block(std::size_t i0, std::size_t j0, std::size_t rows, std::size_t cols) const {
    if (i0 + rows > r_ || j0 + cols > c_) throw NumericError("block out of range");
    Matrix b(rows, cols);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) b(i, j) = (*this)(i0 + i, j0 + j);
    return b;
  }

  void set_block(std::size_t i0, std::size_t j0, const Matrix& b) {
    if (i0 + b.r_ > r_ || j0 + b.c_ > c_) throw NumericError("block out of range");
    for (std::size_t i = 0; i < b.r_; ++i)
      for (std::size_t j = 0; j < b.c_; ++j) (*this)(i0 + i, j0 + j) = b(i, j);
  }

  double frobenius() const {
    double s = 0;
    for (double x : a_) s += x * x;
    return std::sqrt(s);
  }

  double norm1() const {
    double best = 0;
    for (std::size_t j = 0; j < c_; ++j) {
      double s = 0;
      for (std::size_t i = 0; i < r_; ++i) s += std::abs((*this)(i, j));
      best = std::max(best, s);
    }
    return best;
  }

  Matrix& operator+=(const Matrix& o) {
    same_shape(o, "+");
    for (std::size_t k = 0; k < a_.size(); ++k) a_[k] += o.a_[k];
    return *this;
  }
  Matrix& operator-=(const Matrix& o) {
    same_shape(o, "-");
    for (std::size_t k = 0; k < a_.size(); ++k) a_[k] -= o.a_[k];
    return *this;
  }
  friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
  friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
  friend Matrix operator*(double s, Matrix a) {
    for (double& x : a.a_) x *= s;
    return a;
  }
  friend Matrix operator-(Matrix a) { return -1.0 * std::move(a); }

  friend Matrix operator*(const Matrix& a, const Matrix& b) {
    // A 1x1 operand acts as a scalar.
    if (a.r_ == 1 && a.c_ == 1 && b.r_ != 1) return a(0, 0) * b;
    if (b.r_ == 1 && b.c_ == 1 && a.c_ != 1) return b(0, 0) * a;
    if (a.c_ != b.r_)
      throw NumericError("product of " + a.shape() + " and " + b.shape());
    Matrix p(a.r_, b.c_);
    for (std::size_t i = 0; i < a.r_; ++i)
      for (std::size_t k = 0; k < a.c_; ++k) {
        double x = a(i, k);
        for (std::size_t j = 0; j < b.c_; ++j) p(i, j) += x * b(k, j);
      }
    return p;
  }

  std::string shape() const { return std::to_string(r_) + "x" + std::to_string(c_); }

private:
  void same_shape(const Matrix& o, const char* op) const {
    if (r_ != o.r_ || c_ != o.c_) throw NumericError(std::string("shape mismatch in ") + op + ": " + shape() + " vs " + o.shape());
  }

  std::size_t r_ = 0, c_ = 0;
  std::vector<double> a_;
};

inline double relative_residual(const Matrix& got, const Matrix& want) {
  double d = (got - want).frobenius();
  double n = want.frobenius();
  return n > 0 ? d / n : d;
}

// ---------------------------------------------------------------------------
// Reference solvers

/// Lower Cholesky factor, column by column (j outer, then k, then i).
inline Matrix cholesky(const Matrix& a) {
  std::size_t n = a.rows();
  if (a.cols() != n) throw NumericError("cholesky of non-square " + a.shape());
  Matrix l(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) l(i, j) = a(i, j);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < j; ++k)
      for (std::size_t i = j; i < n; ++i) l(i, j) -= l(i, k) * l(j, k);
    if (!(l(j, j) > 0)) throw NumericError("matrix is not positive definite");
    l(j, j) = std::sqrt(l(j, j));
    for (std::size_t i = j + 1; i < n; ++i) l(i, j) /= l(j, j);
  }
  return l;
}

/// Solves L X = B for lower-triangular L by forward substitution.
inline Matrix forward_substitute(const Matrix& l, const Matrix& b) {
  std::size_t n = l.rows();
  if (l.cols() != n || b.rows() != n) throw NumericError("forward substitution shape mismatch");
  Matrix x = b;
  for (std::size_t c = 0; c < b.cols(); ++c)
    for (std::size_t i = 0; i < n; ++i) {
      double s = x(i, c);
      for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * x(k, c);
      if (l(i, i) == 0) throw NumericError("singular triangular matrix");
      x(i, c) = s / l(i, i);
    }
  return x;
}

/// X with X L^T = B, via L X^T = B^T.
inline Matrix trsm_right_lower_trans(const Matrix& l, const Matrix& b) {
  return forward_substitute(l, b.transpose()).transpose();
}

/// X with L X + X U = C for lower L and upper U, one column at a time:
/// (L + u_jj I) x_j = c_j - sum_{i<j} u_ij x_i.
inline Matrix triangular_sylvester(const Matrix& l, const Matrix& u, const Matrix& c) {
  std::size_t m = l.rows(), n = u.rows();
  if (l.cols() != m || u.cols() != n || c.rows() != m || c.cols() != n)
    throw NumericError("sylvester shape mismatch");
  Matrix x(m, n);
  for (std::size_t j = 0; j < n; ++j) {
    Matrix rhs = c.block(0, j, m, 1);
    for (std::size_t i = 0; i < j; ++i)
      for (std::size_t r = 0; r < m; ++r) rhs(r, 0) -= u(i, j) * x(r, i);
    Matrix shifted = l;
    for (std::size_t r = 0; r < m; ++r) shifted(r, r) += u(j, j);
    x.set_block(0, j, forward_substitute(shifted, rhs));
  }
  return x;
}

/// Gauss-Jordan inverse with partial pivoting. Fails when the 1-norm
/// condition estimate exceeds 1e12.
inline Matrix inverse(const Matrix& a) {
  std::size_t n = a.rows();
  if (a.cols() != n) throw NumericError("inverse of non-square " + a.shape());
  Matrix w = a, inv = Matrix::identity(n);
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(w(r, col)) > std::abs(w(piv, col))) piv = r;
    if (w(piv, col) == 0) throw NumericError("singular matrix");
    if (piv != col)
      for (std::size_t j = 0; j < n; ++j) {
        std::swap(w(piv, j), w(col, j));
        std::swap(inv(piv, j), inv(col, j));
      }
    double d = w(col, col);
    for (std::size_t j = 0; j < n; ++j) {
      w(col, j) /= d;
      inv(col, j) /= d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      double f = w(r, col);
      if (f == 0) continue;
      for (std::size_t j = 0; j < n; ++j) {
        w(r, j) -= f * w(col, j);
        inv(r, j) -= f * inv(col, j);
      }
    }
  }
  if (a.norm1() * inv.norm1() > 1e12) throw NumericError("matrix is numerically singular");
  return inv;
}

/// Solves A x = b by Gaussian elimination with partial pivoting.
inline Matrix gauss_solve(Matrix a, Matrix b) {
  std::size_t n = a.rows();
  if (a.cols() != n || b.rows() != n) throw NumericError("gauss_solve shape mismatch");
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
    if (a(piv, col) == 0) throw NumericError("singular system");
    for (std::size_t j = 0; j < n; ++j) std::swap(a(piv, j), a(col, j));
    for (std::size_t j = 0; j < b.cols(); ++j) std::swap(b(piv, j), b(col, j));
    for (std::size_t r = col + 1; r < n; ++r) {
      double f = a(r, col) / a(col, col);
      for (std::size_t j = col; j < n; ++j) a(r, j) -= f * a(col, j);
      for (std::size_t j = 0; j < b.cols(); ++j) b(r, j) -= f * b(col, j);
    }
  }
  Matrix x(n, b.cols());
  for (std::size_t j = 0; j < b.cols(); ++j)
    for (std::size_t i = n; i-- > 0;) {
      double s = b(i, j);
      for (std::size_t k = i + 1; k < n; ++k) s -= a(i, k) * x(k, j);
      x(i, j) = s / a(i, i);
    }
  return x;
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
inline std::vector<double> symmetric_eigenvalues(Matrix a) {
  std::size_t n = a.rows();
  if (a.cols() != n) throw NumericError("eigenvalues of non-square " + a.shape());
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
    if (off < 1e-26) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        if (a(p, q) == 0) continue;
        double theta = (a(q, q) - a(p, p)) / (2 * a(p, q));
        double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1));
        double c = 1 / std::sqrt(t * t + 1), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
  }
  std::vector<double> ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = a(i, i);
  std::sort(ev.begin(), ev.end());
  return ev;
}

}  // namespace pmegen
