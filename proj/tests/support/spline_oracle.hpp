#pragma once

// Brute-force Cox-DeBoor evaluation straight from the two-term recursion,
// independent of the triangular in-span algorithm used by the library.

#include <vector>

#include "hpstokes/spline.hpp"

namespace oracle {

inline double cox_de_boor_value(const std::vector<double>& t, int i, int p, double x,
                                bool right_end) {
  if (p == 0) {
    const double lo = t[static_cast<std::size_t>(i)];
    const double hi = t[static_cast<std::size_t>(i + 1)];
    if (right_end && x == hi && lo < hi) return 1.0;  // half-open intervals, closed at x = 1
    return (x >= lo && x < hi) ? 1.0 : 0.0;
  }
  double v = 0.0;
  const double d1 = t[static_cast<std::size_t>(i + p)] - t[static_cast<std::size_t>(i)];
  if (d1 > 0.0)
    v += (x - t[static_cast<std::size_t>(i)]) / d1 * cox_de_boor_value(t, i, p - 1, x, right_end);
  const double d2 = t[static_cast<std::size_t>(i + p + 1)] - t[static_cast<std::size_t>(i + 1)];
  if (d2 > 0.0)
    v += (t[static_cast<std::size_t>(i + p + 1)] - x) / d2 *
         cox_de_boor_value(t, i + 1, p - 1, x, right_end);
  return v;
}

inline double cox_de_boor_derivative(const std::vector<double>& t, int i, int p, double x,
                                     bool right_end) {
  if (p == 0) return 0.0;
  double v = 0.0;
  const double d1 = t[static_cast<std::size_t>(i + p)] - t[static_cast<std::size_t>(i)];
  if (d1 > 0.0) v += p / d1 * cox_de_boor_value(t, i, p - 1, x, right_end);
  const double d2 = t[static_cast<std::size_t>(i + p + 1)] - t[static_cast<std::size_t>(i + 1)];
  if (d2 > 0.0) v -= p / d2 * cox_de_boor_value(t, i + 1, p - 1, x, right_end);
  return v;
}

/// All n basis function values (or first derivatives) of the open uniform
/// basis at x.
inline hps::Vec bspline_all(const hps::spline::KnotVector& kv, double x, int order) {
  const bool right_end = (x >= 1.0);
  hps::Vec out(static_cast<std::size_t>(kv.num_basis()));
  for (int i = 0; i < kv.num_basis(); ++i)
    out[static_cast<std::size_t>(i)] =
        (order == 0) ? cox_de_boor_value(kv.knots, i, kv.degree, x, right_end)
                     : cox_de_boor_derivative(kv.knots, i, kv.degree, x, right_end);
  return out;
}

}  // namespace oracle
