#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "hpstokes/small_dense.hpp"

namespace hps::spline {

inline constexpr int max_degree = 30;

/// Open (clamped) uniform knot vector on [0,1] with maximal interior
/// regularity: end knots repeated degree+1 times, interior breakpoints
/// simple.
struct KnotVector {
  int degree = 0;
  int elements = 0;
  Vec knots;

  int num_basis() const { return elements + degree; }

  static KnotVector open_uniform(int elements, int degree) {
    if (elements < 1 || degree < 0)
      throw std::invalid_argument("KnotVector: need elements >= 1 and degree >= 0");
    if (degree > max_degree) throw std::invalid_argument("KnotVector: degree too large");
    KnotVector kv;
    kv.degree = degree;
    kv.elements = elements;
    kv.knots.reserve(static_cast<std::size_t>(elements + 1 + 2 * degree));
    for (int i = 0; i < degree; ++i) kv.knots.push_back(0.0);
    for (int i = 0; i <= elements; ++i)
      kv.knots.push_back(static_cast<double>(i) / static_cast<double>(elements));
    for (int i = 0; i < degree; ++i) kv.knots.push_back(1.0);
    return kv;
  }

  /// Knot span index s with t[s] <= x < t[s+1]; x = 1 maps to the last span.
  int find_span(double x) const {
    const int n = num_basis();
    int e = static_cast<int>(std::floor(x * elements));
    e = std::max(0, std::min(elements - 1, e));
    int s = degree + e;
    while (s > degree && x < knots[static_cast<std::size_t>(s)]) --s;
    while (s < n - 1 && x >= knots[static_cast<std::size_t>(s + 1)]) ++s;
    return s;
  }
};

namespace detail {

/// Cox-DeBoor triangle: values[0..p] are the nonzero functions
/// N_{s-p..s,p}(x) for span s. When derivs is non-null it also fills the
/// first derivatives using the degree-(p-1) level of the triangle.
inline void basis_on_span(const KnotVector& kv, int span, double x, double* values,
                          double* derivs) {
  const int p = kv.degree;
  const Vec& t = kv.knots;
  std::array<double, max_degree + 2> left{}, right{}, lower{};

  values[0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    if (derivs && j == p)
      for (int r = 0; r < p; ++r) lower[static_cast<std::size_t>(r)] = values[r];
    left[static_cast<std::size_t>(j)] = x - t[static_cast<std::size_t>(span + 1 - j)];
    right[static_cast<std::size_t>(j)] = t[static_cast<std::size_t>(span + j)] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double denom =
          right[static_cast<std::size_t>(r + 1)] + left[static_cast<std::size_t>(j - r)];
      const double temp = values[r] / denom;
      values[r] = saved + right[static_cast<std::size_t>(r + 1)] * temp;
      saved = left[static_cast<std::size_t>(j - r)] * temp;
    }
    values[j] = saved;
  }

  if (!derivs) return;
  if (p == 0) {
    derivs[0] = 0.0;
    return;
  }
  // N'_{i,p} = p [ N_{i,p-1}/(t_{i+p}-t_i) - N_{i+1,p-1}/(t_{i+p+1}-t_{i+1}) ]
  for (int r = 0; r <= p; ++r) {
    const int i = span - p + r;
    double d = 0.0;
    if (r >= 1) {
      const double den = t[static_cast<std::size_t>(i + p)] - t[static_cast<std::size_t>(i)];
      if (den > 0.0) d += lower[static_cast<std::size_t>(r - 1)] / den;
    }
    if (r <= p - 1) {
      const double den =
          t[static_cast<std::size_t>(i + p + 1)] - t[static_cast<std::size_t>(i + 1)];
      if (den > 0.0) d -= lower[static_cast<std::size_t>(r)] / den;
    }
    derivs[r] = p * d;
  }
}

}  // namespace detail

/// Gauss-Legendre rule on the reference interval [0,1]; exact for
/// polynomials of degree <= 2q-1. Element mapping is done at assembly time.
struct GaussRule {
  int q = 0;
  Vec points;
  Vec weights;
};

inline GaussRule make_gauss_rule(int q) {
  if (q < 1) throw std::invalid_argument("make_gauss_rule: q >= 1 required");
  GaussRule rule;
  rule.q = q;
  rule.points.resize(static_cast<std::size_t>(q));
  rule.weights.resize(static_cast<std::size_t>(q));
  const double pi = std::acos(-1.0);
  for (int k = 0; k < q; ++k) {
    double x = std::cos(pi * (k + 0.75) / (q + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int j = 2; j <= q; ++j) {
        const double pj = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = pj;
      }
      dp = q * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    rule.points[static_cast<std::size_t>(q - 1 - k)] = 0.5 * (x + 1.0);
    rule.weights[static_cast<std::size_t>(q - 1 - k)] = 1.0 / ((1.0 - x * x) * dp * dp);
  }
  return rule;
}

enum class BasisKind {
  bspline,       // standard B-spline basis of the given degree
  unit_integral  // degree reduced by one, each function scaled to unit integral
};

struct ActiveValues {
  Index first = 0;  // index of the first retained active function
  std::vector<double> values;
};

/// A univariate basis on the uniform open knot vector: either the plain
/// B-spline basis of degree p, or its unit-integral sibling of degree p-1.
/// Boundary restriction drops the first and last functions (used for strong
/// no-penetration conditions).
class UnivariateBasis {
 public:
  static UnivariateBasis make(int elements, int degree, BasisKind kind,
                              bool restrict_boundary = false) {
    if (elements < 1 || degree < 1)
      throw std::invalid_argument("UnivariateBasis: need elements >= 1 and degree >= 1");
    UnivariateBasis b;
    b.kind_ = kind;
    b.restricted_ = restrict_boundary;
    const int own_degree = (kind == BasisKind::unit_integral) ? degree - 1 : degree;
    b.knots_ = KnotVector::open_uniform(elements, own_degree);
    if (kind == BasisKind::unit_integral) b.compute_integrals();
    if (b.num_funcs() < 1)
      throw std::invalid_argument("UnivariateBasis: restriction leaves no functions");
    return b;
  }

  BasisKind kind() const { return kind_; }
  bool restricted() const { return restricted_; }
  int degree() const { return knots_.degree; }
  int elements() const { return knots_.elements; }
  Index num_funcs() const { return knots_.num_basis() - (restricted_ ? 2 : 0); }
  const KnotVector& knots() const { return knots_; }

  /// Integral of retained function i over [0,1].
  double function_integral(Index i) const {
    if (kind_ == BasisKind::unit_integral) return 1.0;
    // For B-splines on the open knot vector the exact value is
    // (t_{i+p+1} - t_i)/(p+1).
    const Index full = i + (restricted_ ? 1 : 0);
    const int p = knots_.degree;
    return (knots_.knots[static_cast<std::size_t>(full + p + 1)] -
            knots_.knots[static_cast<std::size_t>(full)]) /
           (p + 1);
  }

  /// Coefficient of retained function i in the representation of the
  /// constant 1: B-splines form a partition of unity, unit-integral
  /// functions carry the original function integral as weight.
  double one_coefficient(Index i) const {
    if (kind_ != BasisKind::unit_integral) return 1.0;
    return integrals_[static_cast<std::size_t>(i + (restricted_ ? 1 : 0))];
  }

  /// Values (order 0) or first derivatives (order 1) of the retained active
  /// functions at x.
  ActiveValues eval(double x, int order) const {
    if (x < 0.0 || x > 1.0) throw std::invalid_argument("UnivariateBasis::eval: x outside [0,1]");
    if (order < 0 || order > 1)
      throw std::invalid_argument("UnivariateBasis::eval: derivative order must be 0 or 1");
    const int p = knots_.degree;
    const int span = knots_.find_span(x);
    std::array<double, max_degree + 1> vals{}, ders{};
    detail::basis_on_span(knots_, span, x, vals.data(), order == 1 ? ders.data() : nullptr);
    const double* raw = (order == 1) ? ders.data() : vals.data();

    const Index full_first = span - p;
    const Index full_count = p + 1;
    Index lo = full_first;
    Index hi = full_first + full_count - 1;
    if (restricted_) {
      lo = std::max<Index>(lo, 1);
      hi = std::min<Index>(hi, knots_.num_basis() - 2);
    }
    ActiveValues out;
    out.first = lo - (restricted_ ? 1 : 0);
    out.values.reserve(static_cast<std::size_t>(std::max<Index>(0, hi - lo + 1)));
    for (Index f = lo; f <= hi; ++f) {
      double v = raw[static_cast<std::size_t>(f - full_first)];
      if (kind_ == BasisKind::unit_integral) v /= integrals_[static_cast<std::size_t>(f)];
      out.values.push_back(v);
    }
    return out;
  }

  /// Dense vector of all retained function values (or derivatives) at x.
  Vec eval_all(double x, int order) const {
    Vec out(static_cast<std::size_t>(num_funcs()), 0.0);
    const ActiveValues av = eval(x, order);
    for (std::size_t k = 0; k < av.values.size(); ++k)
      out[static_cast<std::size_t>(av.first) + k] = av.values[k];
    return out;
  }

 private:
  void compute_integrals() {
    // Quadrature (rather than the closed-form knot formula) keeps a single
    // integration code path; the unit-integral invariant is tested.
    const int q = knots_.degree + 1;
    const GaussRule rule = make_gauss_rule(q);
    integrals_.assign(static_cast<std::size_t>(knots_.num_basis()), 0.0);
    const double h = 1.0 / knots_.elements;
    const int p = knots_.degree;
    std::array<double, max_degree + 1> vals{};
    for (int e = 0; e < knots_.elements; ++e)
      for (int j = 0; j < q; ++j) {
        const double x = (e + rule.points[static_cast<std::size_t>(j)]) * h;
        const double w = rule.weights[static_cast<std::size_t>(j)] * h;
        const int span = knots_.find_span(x);
        detail::basis_on_span(knots_, span, x, vals.data(), nullptr);
        for (int r = 0; r <= p; ++r)
          integrals_[static_cast<std::size_t>(span - p + r)] += w * vals[static_cast<std::size_t>(r)];
      }
  }

  KnotVector knots_;
  BasisKind kind_ = BasisKind::bspline;
  bool restricted_ = false;
  Vec integrals_;  // unnormalized-function integrals (unit_integral kind)
};

/// The univariate Galerkin matrices entering the Kronecker blocks. "check"
/// variants of mass/stiffness are obtained by passing unit-integral bases.
enum class UniKind {
  mass,                 // int f_i g_j
  stiffness,            // int f'_i g'_j
  grad_trial_coupling,  // int N_i M'_j   (B-spline test, unit-integral trial)
  grad_test_coupling,   // int N'_i M_j
  boundary_penalty,     // M_i(1) M_j(1) + M_i(0) M_j(0)
  boundary_flux         // M_i(1) M'_j(1) - M_i(0) M'_j(0)
};

inline DenseMatrix assemble_univariate(const UnivariateBasis& test, const UnivariateBasis& trial,
                                       UniKind kind, const GaussRule& rule) {
  if (test.elements() != trial.elements())
    throw std::invalid_argument("assemble_univariate: bases live on different meshes");

  int dt = 0, dtr = 0;
  switch (kind) {
    case UniKind::mass:
      if (test.kind() != trial.kind())
        throw std::invalid_argument("assemble_univariate: mass requires matching basis kinds");
      break;
    case UniKind::stiffness:
      if (test.kind() != trial.kind())
        throw std::invalid_argument("assemble_univariate: stiffness requires matching basis kinds");
      dt = dtr = 1;
      break;
    case UniKind::grad_trial_coupling:
      if (test.kind() != BasisKind::bspline || trial.kind() != BasisKind::unit_integral)
        throw std::invalid_argument(
            "assemble_univariate: grad_trial_coupling takes (bspline, unit_integral)");
      dtr = 1;
      break;
    case UniKind::grad_test_coupling:
      if (test.kind() != BasisKind::bspline || trial.kind() != BasisKind::unit_integral)
        throw std::invalid_argument(
            "assemble_univariate: grad_test_coupling takes (bspline, unit_integral)");
      dt = 1;
      break;
    case UniKind::boundary_penalty:
    case UniKind::boundary_flux: {
      if (test.kind() != BasisKind::unit_integral || trial.kind() != BasisKind::unit_integral)
        throw std::invalid_argument(
            "assemble_univariate: boundary matrices take unit-integral bases");
      DenseMatrix b(test.num_funcs(), trial.num_funcs());
      const int dtrial = (kind == UniKind::boundary_flux) ? 1 : 0;
      for (int side = 0; side <= 1; ++side) {
        const double x = static_cast<double>(side);
        const double sign = (kind == UniKind::boundary_flux && side == 0) ? -1.0 : 1.0;
        const ActiveValues ti = test.eval(x, 0);
        const ActiveValues tj = trial.eval(x, dtrial);
        for (std::size_t a = 0; a < ti.values.size(); ++a)
          for (std::size_t b2 = 0; b2 < tj.values.size(); ++b2)
            b(ti.first + static_cast<Index>(a), tj.first + static_cast<Index>(b2)) +=
                sign * ti.values[a] * tj.values[b2];
      }
      return b;
    }
  }

  const int needed = (test.degree() + trial.degree()) / 2 + 1;
  if (rule.q < needed)
    throw std::invalid_argument("assemble_univariate: quadrature order too low to be exact");

  DenseMatrix a(test.num_funcs(), trial.num_funcs());
  const int m = test.elements();
  const double h = 1.0 / m;
  for (int e = 0; e < m; ++e)
    for (int j = 0; j < rule.q; ++j) {
      const double x = (e + rule.points[static_cast<std::size_t>(j)]) * h;
      const double w = rule.weights[static_cast<std::size_t>(j)] * h;
      const ActiveValues vt = test.eval(x, dt);
      const ActiveValues vtr = trial.eval(x, dtr);
      for (std::size_t r = 0; r < vt.values.size(); ++r)
        for (std::size_t c = 0; c < vtr.values.size(); ++c)
          a(vt.first + static_cast<Index>(r), vtr.first + static_cast<Index>(c)) +=
              w * vt.values[r] * vtr.values[c];
    }
  return a;
}

/// Positive definite univariate matrix combining the interior stiffness with
/// the Nitsche boundary terms:
///   T = 1/2 (K + (2 c_pen / h) N - B - B^T).
/// Positive definiteness is verified by Cholesky.
inline DenseMatrix nitsche_stiffness(const DenseMatrix& stiffness, const DenseMatrix& penalty,
                                     const DenseMatrix& flux, double c_pen, double h) {
  if (c_pen <= 0.0 || h <= 0.0)
    throw std::invalid_argument("nitsche_stiffness: need c_pen > 0 and h > 0");
  const double alpha2 = 2.0 * c_pen / h;
  const Index n = stiffness.rows();
  DenseMatrix t(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j <= i; ++j) {
      // One expression per unordered pair keeps the result bitwise symmetric.
      const double v =
          0.5 * (stiffness(i, j) + alpha2 * penalty(i, j) - flux(i, j) - flux(j, i));
      t(i, j) = v;
      t(j, i) = v;
    }
  if (!cholesky_factor(t))
    throw std::runtime_error(
        "nitsche_stiffness: matrix not positive definite; penalty constant c_pen likely too small");
  return t;
}

/// The (n-1) x n forward-difference matrix encoding spline differentiation
/// on the coefficient level.
inline DenseMatrix difference_matrix(Index n) {
  if (n < 2) throw std::invalid_argument("difference_matrix: n >= 2 required");
  DenseMatrix d(n - 1, n);
  for (Index i = 0; i < n - 1; ++i) {
    d(i, i) = -1.0;
    d(i, i + 1) = 1.0;
  }
  return d;
}

inline Vec integrate_basis(const UnivariateBasis& basis, const GaussRule& rule, int order = 0) {
  Vec out(static_cast<std::size_t>(basis.num_funcs()), 0.0);
  const int m = basis.elements();
  const double h = 1.0 / m;
  for (int e = 0; e < m; ++e)
    for (int j = 0; j < rule.q; ++j) {
      const double x = (e + rule.points[static_cast<std::size_t>(j)]) * h;
      const double w = rule.weights[static_cast<std::size_t>(j)] * h;
      const ActiveValues v = basis.eval(x, order);
      for (std::size_t k = 0; k < v.values.size(); ++k)
        out[static_cast<std::size_t>(v.first) + k] += w * v.values[k];
    }
  return out;
}

inline Vec trace_basis(const UnivariateBasis& basis, int side, int order) {
  if (side != 0 && side != 1) throw std::invalid_argument("trace_basis: side must be 0 or 1");
  return basis.eval_all(static_cast<double>(side), order);
}

}  // namespace hps::spline
