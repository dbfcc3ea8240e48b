#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hpstokes/operator.hpp"
#include "hpstokes/small_dense.hpp"

namespace hps::spectral {

/// Spectrum of a preconditioned operator at one hyper-power level, together
/// with the prediction carried forward from the previous level through the
/// spectral transfer map l.
struct SpectrumReport {
  int level = 0;
  Vec eigenvalues;  // ascending, null modes dropped
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  double kappa = 0.0;
  double predicted_min = std::numeric_limits<double>::quiet_NaN();
  double predicted_max = std::numeric_limits<double>::quiet_NaN();
  double pinv_min_eigenvalue = 0.0;  // smallest eigenvalue of the dense P^{-1}
  int dropped_null_modes = 0;
};

/// One hyper-power update acts on each eigenvalue as l(lambda) = 2 lambda -
/// lambda^2.
inline double lambda_map(double lambda) { return 2.0 * lambda - lambda * lambda; }

/// Eigenvalues of Pinv * A for symmetric A and SPD Pinv, computed through
/// the congruent symmetric form L^T A L with Pinv = L L^T (real spectrum by
/// construction). Eigenvalues below null_drop_tol * max|lambda| are treated
/// as null modes of A and dropped from the report (the pressure Schur
/// complement carries the constant mode).
inline SpectrumReport generalized_spectrum(const DenseMatrix& a, const DenseMatrix& pinv,
                                           int level = 0, double null_drop_tol = 0.0) {
  if (a.rows() != a.cols() || pinv.rows() != pinv.cols() || a.rows() != pinv.rows())
    throw std::invalid_argument("generalized_spectrum: conforming square matrices required");
  const double a_scale = std::max(a.max_abs(), 1e-300);
  if (symmetry_defect(a) > 1e-10 * a_scale)
    throw std::invalid_argument("generalized_spectrum: operator is not symmetric");

  const DenseMatrix pinv_sym = symmetrized(pinv);
  auto l = cholesky_factor(pinv_sym);
  if (!l) throw std::invalid_argument("generalized_spectrum: preconditioner is not SPD");

  const DenseMatrix g = l->transposed() * symmetrized(a) * (*l);
  EigenDecomposition eig = jacobi_eigensolve(g);

  SpectrumReport rep;
  rep.level = level;
  double lam_max_abs = 0.0;
  for (double v : eig.values) lam_max_abs = std::max(lam_max_abs, std::abs(v));
  for (double v : eig.values) {
    if (null_drop_tol > 0.0 && std::abs(v) <= null_drop_tol * lam_max_abs) {
      ++rep.dropped_null_modes;
      continue;
    }
    rep.eigenvalues.push_back(v);
  }
  if (rep.eigenvalues.empty())
    throw std::runtime_error("generalized_spectrum: empty spectrum after null-mode drop");
  rep.lambda_min = rep.eigenvalues.front();
  rep.lambda_max = rep.eigenvalues.back();
  rep.kappa = rep.lambda_max / rep.lambda_min;
  rep.pinv_min_eigenvalue = jacobi_eigensolve(pinv_sym).values.front();
  return rep;
}

/// Predicted extreme eigenvalues of the next level: the l-image of the whole
/// current spectrum. For the minimum this coincides with the extreme-value
/// formula min{l(lambda_min), l(lambda_max)} (l is concave); the maximum of
/// the image is attained at the eigenvalue closest to one.
inline std::pair<double, double> predict_next(const SpectrumReport& rep) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (double v : rep.eigenvalues) {
    const double m = lambda_map(v);
    lo = std::min(lo, m);
    hi = std::max(hi, m);
  }
  return {lo, hi};
}

inline Vec predicted_spectrum(const SpectrumReport& rep) {
  Vec image;
  image.reserve(rep.eigenvalues.size());
  for (double v : rep.eigenvalues) image.push_back(lambda_map(v));
  std::sort(image.begin(), image.end());
  return image;
}

/// Attaches predicted_min/predicted_max to each report from its predecessor.
inline void annotate_predictions(std::vector<SpectrumReport>& reports) {
  for (std::size_t k = 1; k < reports.size(); ++k) {
    const auto [lo, hi] = predict_next(reports[k - 1]);
    reports[k].predicted_min = lo;
    reports[k].predicted_max = hi;
  }
}

struct TheoryCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct TheoryReport {
  std::vector<TheoryCheck> checks;
  bool all_pass = true;

  void add(std::string name, bool pass, std::string detail) {
    all_pass = all_pass && pass;
    checks.push_back({std::move(name), pass, std::move(detail)});
  }

  std::string summary() const {
    std::ostringstream os;
    for (const auto& c : checks)
      os << (c.pass ? "  [ok]   " : "  [FAIL] ") << c.name << ": " << c.detail << "\n";
    return os.str();
  }
};

struct TheoryOptions {
  bool check_unit_bound = true;   // spectrum in (0, 1 + unit_eps] for k >= 1
  bool check_spd = true;          // dense P_k^{-1} positive definite
  bool check_kappa = true;        // condition numbers strictly decreasing from k >= 1
  bool check_lmap = true;         // eigenvalue multisets follow the l-map
  double unit_eps = 1e-8;
  double lmap_tol = 1e-6;
};

/// Verifies the hyper-power spectral theory on a sequence of reports
/// (levels 0..K of one preconditioner sequence). Any failed assertion is
/// reported in detail rather than silently dropped.
inline TheoryReport verify_theory(const std::vector<SpectrumReport>& reports,
                                  const TheoryOptions& opt = {}) {
  TheoryReport out;
  if (reports.size() < 2) {
    out.add("sequence", false, "need at least levels 0 and 1");
    return out;
  }

  {
    const auto& r0 = reports.front();
    const bool ok = r0.lambda_min > 0.0 && r0.lambda_max < 2.0;
    std::ostringstream os;
    os << "sigma(P_0) = [" << r0.lambda_min << ", " << r0.lambda_max << "] within (0, 2)";
    out.add("initial-spectrum", ok, os.str());
  }

  if (opt.check_unit_bound) {
    bool ok = true;
    std::ostringstream os;
    for (std::size_t k = 1; k < reports.size(); ++k) {
      const auto& r = reports[k];
      if (!(r.lambda_min > 0.0 && r.lambda_max <= 1.0 + opt.unit_eps)) {
        ok = false;
        os << "level " << r.level << " spectrum [" << r.lambda_min << ", " << r.lambda_max
           << "] outside (0, 1]; ";
      }
    }
    if (ok) os << "all levels >= 1 inside (0, 1 + " << opt.unit_eps << "]";
    out.add("unit-interval-bound", ok, os.str());
  }

  if (opt.check_spd) {
    bool ok = true;
    std::ostringstream os;
    for (const auto& r : reports)
      if (!(r.pinv_min_eigenvalue > 0.0)) {
        ok = false;
        os << "level " << r.level << " min eig of P^{-1} = " << r.pinv_min_eigenvalue << "; ";
      }
    if (ok) os << "dense P_k^{-1} positive definite at every level";
    out.add("positive-definite", ok, os.str());
  }

  if (opt.check_kappa) {
    bool ok = true;
    std::ostringstream os;
    os << "kappa:";
    for (const auto& r : reports) os << " " << r.kappa;
    for (std::size_t k = 2; k < reports.size(); ++k)
      if (!(reports[k].kappa < reports[k - 1].kappa)) ok = false;
    out.add("kappa-strictly-decreasing", ok, os.str());
  }

  if (opt.check_lmap) {
    bool ok = true;
    std::ostringstream os;
    double worst = 0.0;
    for (std::size_t k = 1; k < reports.size(); ++k) {
      const Vec pred = predicted_spectrum(reports[k - 1]);
      const Vec& obs = reports[k].eigenvalues;
      if (pred.size() != obs.size()) {
        ok = false;
        os << "level " << reports[k].level << ": eigenvalue count changed; ";
        continue;
      }
      for (std::size_t i = 0; i < obs.size(); ++i) {
        const double denom = std::max(std::abs(obs[i]), 1e-12);
        worst = std::max(worst, std::abs(pred[i] - obs[i]) / denom);
      }
    }
    if (worst > opt.lmap_tol) ok = false;
    os << "max relative multiset deviation " << worst << " (tol " << opt.lmap_tol << ")";
    out.add("lmap-multiset", ok, os.str());
  }

  return out;
}

inline nlohmann::json to_json(const SpectrumReport& rep) {
  nlohmann::json j;
  j["level"] = rep.level;
  j["eigenvalues"] = rep.eigenvalues;
  j["lambda_min"] = rep.lambda_min;
  j["lambda_max"] = rep.lambda_max;
  j["kappa"] = rep.kappa;
  j["predicted_min"] = rep.predicted_min;
  j["predicted_max"] = rep.predicted_max;
  j["pinv_min_eigenvalue"] = rep.pinv_min_eigenvalue;
  j["dropped_null_modes"] = rep.dropped_null_modes;
  return j;
}

}  // namespace hps::spectral
