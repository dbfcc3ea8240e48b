#include <doctest.h>

#include <random>

#include "hpstokes/precond.hpp"
#include "hpstokes/spectral.hpp"
#include "support/dense_oracles.hpp"

using namespace hps;
using spectral::SpectrumReport;

namespace {

OpPtr dense_op(DenseMatrix m) { return std::make_shared<DenseOp>(std::move(m)); }

}  // namespace

TEST_CASE("materialize: identity, kronecker products and the size guard") {
  IdentityOp id(3);
  CHECK((materialize(id) - DenseMatrix::identity(3)).max_abs() == 0.0);

  std::mt19937_64 gen(71);
  const DenseMatrix a = oracle::random_matrix(3, 2, gen);
  const DenseMatrix b = oracle::random_matrix(2, 4, gen);
  kron::KroneckerOp op({a, b});
  CHECK((materialize(op) - oracle::dense_kron({a, b})).max_abs() < 1e-14);

  IdentityOp big(6000);
  CHECK_THROWS_AS(materialize(big), std::invalid_argument);
}

TEST_CASE("materialized hyper-power level equals the dense algebra 2X - X A X") {
  std::mt19937_64 gen(72);
  const DenseMatrix a = oracle::random_spd(5, gen);
  const DenseMatrix x = 0.5 * oracle::dense_inverse(a);
  auto lvl1 = precond::hyperpower_step(dense_op(x), dense_op(a));
  const DenseMatrix got = materialize(lvl1);
  const DenseMatrix want = 2.0 * x - x * a * x;
  CHECK((got - want).max_abs() < 1e-13 * want.max_abs());
}

TEST_CASE("generalized spectrum: identical operators give a flat unit spectrum") {
  std::mt19937_64 gen(73);
  const DenseMatrix p = oracle::random_spd(6, gen);
  const auto rep = spectral::generalized_spectrum(p, oracle::dense_inverse(p), 0);
  for (double v : rep.eigenvalues) CHECK(v == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(rep.kappa == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("generalized spectrum agrees with a brute-force nonsymmetric eigensolve") {
  std::mt19937_64 gen(74);
  const DenseMatrix a = oracle::random_spd(6, gen);
  const DenseMatrix pinv = oracle::dense_inverse(oracle::random_spd(6, gen));
  const auto rep = spectral::generalized_spectrum(a, pinv, 0);
  const Vec ref = oracle::qr_eigenvalues(pinv * a);
  REQUIRE(rep.eigenvalues.size() == ref.size());
  for (std::size_t i = 0; i < ref.size(); ++i)
    CHECK(rep.eigenvalues[i] == doctest::Approx(ref[i]).epsilon(1e-8));
}

TEST_CASE("generalized spectrum rejects non-SPD preconditioners and asymmetric operators") {
  std::mt19937_64 gen(75);
  const DenseMatrix a = oracle::random_spd(4, gen);
  DenseMatrix indef = DenseMatrix::identity(4);
  indef(0, 0) = -1.0;
  CHECK_THROWS_AS(spectral::generalized_spectrum(a, indef, 0), std::invalid_argument);
  DenseMatrix skew(4, 4);
  skew(0, 1) = 1.0;
  skew(1, 0) = -1.0;
  CHECK_THROWS_AS(spectral::generalized_spectrum(skew, a, 0), std::invalid_argument);
}

TEST_CASE("spectral transfer map: fixed point and reference values") {
  CHECK(spectral::lambda_map(1.0) == 1.0);
  CHECK(spectral::lambda_map(0.71) == doctest::Approx(0.9159).epsilon(1e-12));
  CHECK(spectral::lambda_map(1.41) == doctest::Approx(0.8319).epsilon(1e-12));
  CHECK(spectral::lambda_map(0.9717) == doctest::Approx(0.99919911).epsilon(1e-10));

  // Quadratic convergence identity: 1 - l(x) = (1 - x)^2.
  for (double x : {0.3, 0.8319, 0.9717, 0.9992}) {
    const double next = spectral::lambda_map(x);
    CHECK(1.0 - next == doctest::Approx((1.0 - x) * (1.0 - x)).epsilon(1e-12));
  }
}

TEST_CASE("predict_next takes the l-image extremes of the whole spectrum") {
  SpectrumReport rep;
  rep.eigenvalues = {0.71, 0.95, 1.0, 1.41};
  rep.lambda_min = 0.71;
  rep.lambda_max = 1.41;
  const auto [lo, hi] = spectral::predict_next(rep);
  CHECK(lo == doctest::Approx(spectral::lambda_map(1.41)).epsilon(1e-14));
  CHECK(hi == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("verify_theory on a synthetic diagonal sequence") {
  // Diagonal A with P0 = I scaled so the spectrum sits inside (0, 2).
  const Index n = 6;
  DenseMatrix a(n, n);
  for (Index i = 0; i < n; ++i) a(i, i) = 0.4 + 0.25 * static_cast<double>(i);  // 0.4 .. 1.65
  OpPtr aop = dense_op(a);
  OpPtr p = dense_op(DenseMatrix::identity(n));

  std::vector<SpectrumReport> reports;
  for (int k = 0; k <= 3; ++k) {
    reports.push_back(spectral::generalized_spectrum(a, materialize(p), k));
    p = precond::hyperpower_step(p, aop);
  }
  spectral::annotate_predictions(reports);

  // The observed eigenvalues are exactly the iterated map of the diagonal.
  for (int k = 0; k <= 3; ++k) {
    Vec expect;
    for (Index i = 0; i < n; ++i) {
      double lam = a(i, i);
      for (int j = 0; j < k; ++j) lam = spectral::lambda_map(lam);
      expect.push_back(lam);
    }
    std::sort(expect.begin(), expect.end());
    for (std::size_t i = 0; i < expect.size(); ++i)
      CHECK(reports[static_cast<std::size_t>(k)].eigenvalues[i] ==
            doctest::Approx(expect[i]).epsilon(1e-10));
  }

  const auto theory = spectral::verify_theory(reports);
  CHECK(theory.all_pass);

  // A corrupted report must produce a detailed failure, not a silent pass.
  auto broken = reports;
  broken[2].kappa = broken[1].kappa * 2.0;
  const auto bad = spectral::verify_theory(broken);
  CHECK_FALSE(bad.all_pass);
  bool found = false;
  for (const auto& c : bad.checks)
    if (!c.pass && c.name == "kappa-strictly-decreasing") found = true;
  CHECK(found);
}

TEST_CASE("verify_theory passes on the assembled velocity sequence") {
  const auto sys =
      stokes::assemble_system(stokes::build_space(2, 2), 1.0, stokes::default_penalty(2), {});
  auto seq = precond::velocity_sequence(sys, 3, 1.0, false);
  const DenseMatrix a = materialize(sys.velocity_op);
  std::vector<SpectrumReport> reports;
  for (int k = 0; k <= 3; ++k)
    reports.push_back(
        spectral::generalized_spectrum(a, materialize(seq[static_cast<std::size_t>(k)]), k));
  spectral::annotate_predictions(reports);

  spectral::TheoryOptions opt;
  opt.lmap_tol = 1e-8;
  const auto theory = spectral::verify_theory(reports, opt);
  INFO(theory.summary());
  CHECK(theory.all_pass);

  // Extreme-value prediction from the previous level's report.
  for (std::size_t k = 1; k < reports.size(); ++k) {
    CHECK(reports[k].lambda_min ==
          doctest::Approx(reports[k].predicted_min).epsilon(1e-8));
    CHECK(reports[k].lambda_max ==
          doctest::Approx(reports[k].predicted_max).epsilon(1e-8));
  }
}

TEST_CASE("spectrum reports serialize with the documented fields") {
  SpectrumReport rep;
  rep.level = 2;
  rep.eigenvalues = {0.5, 1.0};
  rep.lambda_min = 0.5;
  rep.lambda_max = 1.0;
  rep.kappa = 2.0;
  rep.predicted_min = 0.75;
  rep.predicted_max = 1.0;
  rep.pinv_min_eigenvalue = 0.1;
  const auto j = spectral::to_json(rep);
  for (const char* key : {"level", "eigenvalues", "lambda_min", "lambda_max", "kappa",
                          "predicted_min", "predicted_max"})
    CHECK(j.contains(key));
  CHECK(j["eigenvalues"].size() == 2);
  CHECK(j["kappa"] == 2.0);
}
