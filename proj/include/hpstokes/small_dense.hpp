#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hps {

using Index = std::ptrdiff_t;
using Vec = std::vector<double>;

/// Dense row-major matrix for the small univariate factors and desk-scale
/// verification work. Not meant for large systems; everything at benchmark
/// scale stays in operator form.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(Index rows, Index cols, double value = 0.0)
      : rows_(rows), cols_(cols), a_(static_cast<std::size_t>(rows * cols), value) {
    if (rows < 0 || cols < 0) throw std::invalid_argument("DenseMatrix: negative size");
  }
  DenseMatrix(Index rows, Index cols, std::initializer_list<double> entries)
      : DenseMatrix(rows, cols) {
    if (static_cast<Index>(entries.size()) != rows * cols)
      throw std::invalid_argument("DenseMatrix: entry count mismatch");
    std::copy(entries.begin(), entries.end(), a_.begin());
  }

  static DenseMatrix identity(Index n) {
    DenseMatrix I(n, n);
    for (Index i = 0; i < n; ++i) I(i, i) = 1.0;
    return I;
  }

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }

  double& operator()(Index i, Index j) { return a_[static_cast<std::size_t>(i * cols_ + j)]; }
  double operator()(Index i, Index j) const { return a_[static_cast<std::size_t>(i * cols_ + j)]; }

  std::span<const double> data() const { return a_; }
  std::span<double> data() { return a_; }

  DenseMatrix transposed() const {
    DenseMatrix t(cols_, rows_);
    for (Index i = 0; i < rows_; ++i)
      for (Index j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  DenseMatrix& operator*=(double s) {
    for (double& v : a_) v *= s;
    return *this;
  }
  DenseMatrix& operator+=(const DenseMatrix& o) {
    require_same_shape(o);
    for (std::size_t k = 0; k < a_.size(); ++k) a_[k] += o.a_[k];
    return *this;
  }
  DenseMatrix& operator-=(const DenseMatrix& o) {
    require_same_shape(o);
    for (std::size_t k = 0; k < a_.size(); ++k) a_[k] -= o.a_[k];
    return *this;
  }

  bool is_finite() const {
    for (double v : a_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : a_) m = std::max(m, std::abs(v));
    return m;
  }

  double frobenius_norm() const {
    double s = 0.0;
    for (double v : a_) s += v * v;
    return std::sqrt(s);
  }

 private:
  void require_same_shape(const DenseMatrix& o) const {
    if (rows_ != o.rows_ || cols_ != o.cols_)
      throw std::invalid_argument("DenseMatrix: shape mismatch");
  }

  Index rows_ = 0;
  Index cols_ = 0;
  std::vector<double> a_;
};

inline DenseMatrix operator*(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: shape mismatch");
  DenseMatrix c(a.rows(), b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (Index j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

inline DenseMatrix operator*(double s, DenseMatrix a) {
  a *= s;
  return a;
}

inline DenseMatrix operator+(DenseMatrix a, const DenseMatrix& b) {
  a += b;
  return a;
}

inline DenseMatrix operator-(DenseMatrix a, const DenseMatrix& b) {
  a -= b;
  return a;
}

inline Vec operator*(const DenseMatrix& a, std::span<const double> x) {
  if (static_cast<Index>(x.size()) != a.cols())
    throw std::invalid_argument("matvec: shape mismatch");
  Vec y(static_cast<std::size_t>(a.rows()), 0.0);
  for (Index i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (Index j = 0; j < a.cols(); ++j) s += a(i, j) * x[static_cast<std::size_t>(j)];
    y[static_cast<std::size_t>(i)] = s;
  }
  return y;
}

inline double symmetry_defect(const DenseMatrix& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("symmetry_defect: not square");
  double d = 0.0;
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < i; ++j) d = std::max(d, std::abs(a(i, j) - a(j, i)));
  return d;
}

inline DenseMatrix symmetrized(const DenseMatrix& a) {
  DenseMatrix s(a.rows(), a.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j) s(i, j) = 0.5 * (a(i, j) + a(j, i));
  return s;
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
/// Returns std::nullopt when a pivot drops below tol * max diagonal entry.
inline std::optional<DenseMatrix> cholesky_factor(const DenseMatrix& a, double tol = 1e-14) {
  const Index n = a.rows();
  if (a.cols() != n) throw std::invalid_argument("cholesky: not square");
  double dmax = 0.0;
  for (Index i = 0; i < n; ++i) dmax = std::max(dmax, std::abs(a(i, i)));
  DenseMatrix l(n, n);
  for (Index j = 0; j < n; ++j) {
    double d = a(j, j);
    for (Index k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > tol * dmax)) return std::nullopt;
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (Index i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (Index k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return l;
}

inline void forward_subst(const DenseMatrix& l, std::span<double> x) {
  const Index n = l.rows();
  for (Index i = 0; i < n; ++i) {
    double s = x[static_cast<std::size_t>(i)];
    for (Index k = 0; k < i; ++k) s -= l(i, k) * x[static_cast<std::size_t>(k)];
    x[static_cast<std::size_t>(i)] = s / l(i, i);
  }
}

/// Solves L^T x = b in place given the lower factor L.
inline void back_subst_transposed(const DenseMatrix& l, std::span<double> x) {
  const Index n = l.rows();
  for (Index i = n - 1; i >= 0; --i) {
    double s = x[static_cast<std::size_t>(i)];
    for (Index k = i + 1; k < n; ++k) s -= l(k, i) * x[static_cast<std::size_t>(k)];
    x[static_cast<std::size_t>(i)] = s / l(i, i);
  }
}

inline Vec cholesky_solve(const DenseMatrix& l, std::span<const double> b) {
  Vec x(b.begin(), b.end());
  forward_subst(l, x);
  back_subst_transposed(l, x);
  return x;
}

/// Solves L X = B column-wise (forward substitution on a matrix right-hand side).
inline DenseMatrix forward_subst_matrix(const DenseMatrix& l, const DenseMatrix& b) {
  DenseMatrix x = b;
  const Index n = l.rows();
  for (Index j = 0; j < x.cols(); ++j)
    for (Index i = 0; i < n; ++i) {
      double s = x(i, j);
      for (Index k = 0; k < i; ++k) s -= l(i, k) * x(k, j);
      x(i, j) = s / l(i, i);
    }
  return x;
}

/// Solves L^T X = B column-wise.
inline DenseMatrix back_subst_transposed_matrix(const DenseMatrix& l, const DenseMatrix& b) {
  DenseMatrix x = b;
  const Index n = l.rows();
  for (Index j = 0; j < x.cols(); ++j)
    for (Index i = n - 1; i >= 0; --i) {
      double s = x(i, j);
      for (Index k = i + 1; k < n; ++k) s -= l(k, i) * x(k, j);
      x(i, j) = s / l(i, i);
    }
  return x;
}

struct EigenDecomposition {
  Vec values;          // ascending
  DenseMatrix vectors; // columns, orthonormal
};

/// Cyclic Jacobi eigensolver for symmetric matrices. Good to near machine
/// precision for the matrix sizes used here (univariate factors and
/// desk-scale materializations).
inline EigenDecomposition jacobi_eigensolve(const DenseMatrix& a_in, int max_sweeps = 60) {
  const Index n = a_in.rows();
  if (a_in.cols() != n) throw std::invalid_argument("jacobi: not square");
  DenseMatrix a = symmetrized(a_in);
  DenseMatrix v = DenseMatrix::identity(n);

  auto off_norm = [&]() {
    double s = 0.0;
    for (Index i = 0; i < n; ++i)
      for (Index j = i + 1; j < n; ++j) s += a(i, j) * a(i, j);
    return std::sqrt(2.0 * s);
  };

  const double scale = std::max(a.max_abs(), 1e-300);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    if (off_norm() <= 1e-15 * scale * n) break;
    for (Index p = 0; p < n - 1; ++p)
      for (Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Index k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
  }

  std::vector<Index> order(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&](Index i, Index j) { return a(i, i) < a(j, j); });

  EigenDecomposition e;
  e.values.resize(static_cast<std::size_t>(n));
  e.vectors = DenseMatrix(n, n);
  for (Index i = 0; i < n; ++i) {
    const Index src = order[static_cast<std::size_t>(i)];
    e.values[static_cast<std::size_t>(i)] = a(src, src);
    for (Index k = 0; k < n; ++k) e.vectors(k, i) = v(k, src);
  }
  return e;
}

inline double dot(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

inline double norm2(std::span<const double> x) { return std::sqrt(dot(x, x)); }

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

}  // namespace hps
