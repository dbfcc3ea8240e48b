#include <doctest.h>

#include <random>

#include "hpstokes/stokes.hpp"
#include "support/dense_oracles.hpp"
#include "support/galerkin_oracle.hpp"

using namespace hps;
using stokes::LidConfig;
using stokes::StokesSystem;

namespace {

StokesSystem make_system(int m, int p, double nu = 1.0, double c_pen = -1.0,
                         LidConfig lid = {}) {
  if (c_pen <= 0.0) c_pen = stokes::default_penalty(p);
  return stokes::assemble_system(stokes::build_space(m, p), nu, c_pen, lid);
}

}  // namespace

TEST_CASE("space dimensions follow the compatible-complex counting") {
  const auto s24 = stokes::build_space(2, 4);
  CHECK(s24->n_vel_dir(0) == 4);
  CHECK(s24->n_tang_dir(0) == 5);
  CHECK(s24->component_size(0) == 100);
  CHECK(s24->n_velocity() == 300);
  CHECK(s24->n_pressure() == 125);

  const auto s82 = stokes::build_space(8, 2);
  CHECK(s82->n_pressure() == 729);

  CHECK_THROWS_AS(stokes::build_space(1, 2), std::invalid_argument);
  CHECK_THROWS_AS(stokes::build_space(4, 1), std::invalid_argument);
}

TEST_CASE("zero maps to zero through every block") {
  const StokesSystem sys = make_system(2, 2);
  const Vec zv(static_cast<std::size_t>(sys.n_velocity()), 0.0);
  for (double v : sys.velocity_op->apply(zv)) CHECK(v == 0.0);
  for (double v : sys.divergence_t->apply(zv)) CHECK(v == 0.0);
  for (double v : sys.apply_saddle(Vec(static_cast<std::size_t>(sys.n_total()), 0.0))) CHECK(v == 0.0);
}

TEST_CASE("saddle block structure: zero velocity input returns B p") {
  const StokesSystem sys = make_system(2, 2);
  std::mt19937_64 gen(31);
  Vec z(static_cast<std::size_t>(sys.n_total()), 0.0);
  const Vec p = oracle::random_vec(static_cast<std::size_t>(sys.n_pressure()), gen);
  std::copy(p.begin(), p.end(), z.begin() + sys.n_velocity());
  const Vec out = sys.apply_saddle(z);
  const Vec bp = sys.divergence_op->apply(p);
  for (Index i = 0; i < sys.n_velocity(); ++i)
    CHECK(out[static_cast<std::size_t>(i)] ==
          doctest::Approx(bp[static_cast<std::size_t>(i)]).epsilon(1e-14));
  for (Index i = sys.n_velocity(); i < sys.n_total(); ++i)
    CHECK(out[static_cast<std::size_t>(i)] == 0.0);
}

TEST_CASE("velocity block is symmetric positive definite at desk scale") {
  for (const auto& [m, p] : {std::pair{2, 2}, std::pair{3, 3}}) {
    const StokesSystem sys = make_system(m, p);
    const DenseMatrix a = materialize(sys.velocity_op);
    CHECK(symmetry_defect(a) < 1e-13 * a.max_abs());
    const EigenDecomposition e = jacobi_eigensolve(a);
    CHECK(e.values.front() > 0.0);
  }
}

TEST_CASE("saddle operator is self-adjoint and matches its dense materialization") {
  const StokesSystem sys = make_system(2, 2);
  std::mt19937_64 gen(32);
  const DenseMatrix s = materialize(sys.saddle_op);
  for (int rep = 0; rep < 5; ++rep) {
    const Vec z = oracle::random_vec(static_cast<std::size_t>(sys.n_total()), gen);
    const Vec w = oracle::random_vec(static_cast<std::size_t>(sys.n_total()), gen);
    const Vec sz = sys.apply_saddle(z);
    const Vec sw = sys.apply_saddle(w);
    CHECK(dot(sz, w) == doctest::Approx(dot(z, sw)).epsilon(1e-12));

    const Vec dense_sz = s * z;
    for (std::size_t i = 0; i < sz.size(); ++i)
      CHECK(sz[i] == doctest::Approx(dense_sz[i]).epsilon(1e-12));
  }
}

TEST_CASE("kronecker assembly equals direct-quadrature Galerkin assembly") {
  for (const auto& [m, p] : {std::pair{2, 2}, std::pair{2, 3}}) {
    const double c_pen = stokes::default_penalty(p);
    const LidConfig lid{};
    const StokesSystem sys = make_system(m, p, 1.0, c_pen, lid);
    const oracle::GalerkinDense ref = oracle::assemble_dense(*sys.space, 1.0, c_pen, lid);

    const DenseMatrix a = materialize(sys.velocity_op);
    CHECK((a - ref.a).max_abs() < 1e-11 * ref.a.max_abs());

    const DenseMatrix b = materialize(sys.divergence_op);
    CHECK((b - ref.b).max_abs() < 1e-11 * ref.b.max_abs());

    double fmax = 0.0, ferr = 0.0;
    for (std::size_t i = 0; i < ref.f.size(); ++i) {
      fmax = std::max(fmax, std::abs(ref.f[i]));
      ferr = std::max(ferr, std::abs(ref.f[i] - sys.rhs[i]));
    }
    CHECK(fmax > 0.0);
    CHECK(ferr < 1e-11 * fmax);
  }
}

TEST_CASE("lid data loads only the components coupled by the boundary form") {
  const StokesSystem sys = make_system(3, 2);
  // g = (1,0,0) on the face normal to axis 3: component 2 decouples, and the
  // component-3 terms vanish through the restricted normal trace.
  const Index n1 = sys.space->component_size(0);
  double comp1_norm = 0.0;
  for (Index i = 0; i < n1; ++i) comp1_norm += std::abs(sys.rhs[static_cast<std::size_t>(i)]);
  CHECK(comp1_norm > 0.0);
  for (Index i = n1; i < sys.n_velocity(); ++i)
    CHECK(sys.rhs[static_cast<std::size_t>(i)] == 0.0);
}

TEST_CASE("lid data with a normal component is rejected") {
  const auto space = stokes::build_space(2, 2);
  LidConfig bad;
  bad.velocity = {0.0, 0.0, 1.0};  // normal to the default axis-3 lid
  CHECK_THROWS_AS(stokes::assemble_rhs_lid(*space, 1.0, 10.0, bad), std::invalid_argument);
}

TEST_CASE("discrete divergence theorem: constants annihilate B^T u") {
  const StokesSystem sys = make_system(3, 3);
  const Vec c = sys.space->constant_pressure_coefficients();
  std::mt19937_64 gen(33);
  for (int rep = 0; rep < 5; ++rep) {
    const Vec u = oracle::random_vec(static_cast<std::size_t>(sys.n_velocity()), gen);
    const Vec btu = sys.divergence_t->apply(u);
    CHECK(std::abs(dot(c, btu)) < 1e-11 * norm2(u));
  }
}

TEST_CASE("pressure mean normalization zeroes the field mean") {
  const auto space = stokes::build_space(2, 3);
  std::mt19937_64 gen(34);
  Vec p = oracle::random_vec(static_cast<std::size_t>(space->n_pressure()), gen);
  stokes::normalize_pressure_mean(*space, p);
  double mean = 0.0;
  for (double v : p) mean += v;  // unit-integral functions: mean = coefficient sum
  CHECK(std::abs(mean) < 1e-12);
}

TEST_CASE("permuting the lid axis permutes the load components") {
  const auto space = stokes::build_space(2, 2);
  LidConfig lid_z;  // axis 2, g = e_1
  const Vec f_z = stokes::assemble_rhs_lid(*space, 1.0, 10.0, lid_z);
  LidConfig lid_x;
  lid_x.axis = 0;
  lid_x.velocity = {0.0, 0.0, 1.0};  // tangential to the axis-1 face
  const Vec f_x = stokes::assemble_rhs_lid(*space, 1.0, 10.0, lid_x);

  // Swapping directions 1 and 3 maps (component 1, lid axis 3) onto
  // (component 3, lid axis 1): f_x on component 3 is the index-transposed
  // f_z on component 1.
  const auto dims = space->component_dims(0);
  const Index off3 = space->component_size(0) + space->component_size(1);
  for (Index i3 = 0; i3 < dims[2]; ++i3)
    for (Index i2 = 0; i2 < dims[1]; ++i2)
      for (Index i1 = 0; i1 < dims[0]; ++i1) {
        const Index id_z = i1 + dims[0] * (i2 + dims[1] * i3);
        const auto dims3 = space->component_dims(2);
        const Index id_x = i3 + dims3[0] * (i2 + dims3[1] * i1);
        CHECK(f_z[static_cast<std::size_t>(id_z)] ==
              doctest::Approx(f_x[static_cast<std::size_t>(off3 + id_x)]).epsilon(1e-13));
      }
}
