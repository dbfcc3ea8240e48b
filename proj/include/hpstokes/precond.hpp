#pragma once

#include <cmath>
#include <cstdint>
#include <iostream>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "hpstokes/operator.hpp"
#include "hpstokes/stokes.hpp"
#include "hpstokes/tensorkron.hpp"

namespace hps::precond {

/// One hyper-power update: given the current inverse approximation P^{-1}
/// and the matrix approximation A~, the next level applies
///   v -> 2 P^{-1} v - P^{-1} A~ P^{-1} v.
/// A~ is only ever applied, never inverted. Each apply performs exactly two
/// applies of the previous level and one of A~.
class HyperPowerOp final : public LinearOperator {
 public:
  HyperPowerOp(OpPtr previous, OpPtr atilde, int level)
      : LinearOperator(previous->rows(), previous->cols()),
        prev_(std::move(previous)),
        atilde_(std::move(atilde)),
        level_(level) {
    if (prev_->rows() != prev_->cols() || atilde_->rows() != atilde_->cols() ||
        prev_->rows() != atilde_->rows())
      throw std::invalid_argument("HyperPowerOp: conforming square operators required");
  }

  int level() const { return level_; }
  const OpPtr& previous() const { return prev_; }
  const OpPtr& approximation() const { return atilde_; }

 private:
  void do_apply(std::span<const double> v, std::span<double> y) const override {
    const std::size_t n = v.size();
    detail::WorkBuffer w1(n), w2(n);
    prev_->apply(v, w1.span());
    atilde_->apply(w1.span(), w2.span());
    prev_->apply(w2.span(), y);
    for (std::size_t i = 0; i < n; ++i) y[i] = 2.0 * w1.span()[i] - y[i];
    flops::add(static_cast<std::uint64_t>(2 * n));
  }

  OpPtr prev_;
  OpPtr atilde_;
  int level_;
};

inline OpPtr hyperpower_step(OpPtr pinv, OpPtr atilde) {
  int level = 1;
  if (auto hp = std::dynamic_pointer_cast<const HyperPowerOp>(pinv)) level = hp->level() + 1;
  return std::make_shared<HyperPowerOp>(std::move(pinv), std::move(atilde), level);
}

/// Truncated Neumann series sum_{j=0}^{order-1} (I - P0inv A~)^j P0inv v,
/// evaluated by the recurrence r_{j+1} = r_j - P0inv(A~ r_j). k hyper-power
/// steps coincide with order 2^k.
inline Vec neumann_apply(const LinearOperator& p0inv, const LinearOperator& atilde, int order,
                         std::span<const double> v) {
  if (order < 1 || (order & (order - 1)) != 0)
    throw std::invalid_argument("neumann_apply: order must be a power of two");
  const std::size_t n = v.size();
  Vec r(static_cast<std::size_t>(p0inv.rows()));
  p0inv.apply(v, r);
  Vec sum = r;
  Vec t(n), t2(n);
  for (int j = 1; j < order; ++j) {
    atilde.apply(r, t);
    p0inv.apply(t, t2);
    for (std::size_t i = 0; i < n; ++i) {
      r[i] -= t2[i];
      sum[i] += r[i];
    }
  }
  return sum;
}

/// Application-cost model C_k = 2^k c_P + (2^k - 1) c_A for a level-k
/// hyper-power preconditioner built from a base preconditioner costing c_P
/// per apply and an approximation costing c_A.
struct CostModel {
  double c_p = 0.0;
  double c_a = 0.0;

  double cost(int k) const {
    const double two_k = std::ldexp(1.0, k);
    return two_k * c_p + (two_k - 1.0) * c_a;
  }
  double ratio(int k) const { return cost(k) / c_p; }
};

struct SpectralEstimate {
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  int iterations = 0;
};

/// Extreme eigenvalue estimate of Pinv * A by the Lanczos process hidden in
/// preconditioned CG (A and Pinv both SPD). An optional kernel vector is
/// deflated so singular-but-consistent operators (the pressure Schur
/// complement with its constant mode) report their positive spectrum.
inline SpectralEstimate lanczos_extremes(const LinearOperator& a, const LinearOperator& pinv,
                                         int iterations = 30, unsigned seed = 20240u,
                                         const Vec* kernel = nullptr) {
  const Index n = a.rows();
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> dist;
  Vec r(static_cast<std::size_t>(n));
  for (double& v : r) v = dist(gen);

  auto deflate = [&](Vec& x) {
    if (!kernel) return;
    const double c2 = dot(*kernel, *kernel);
    const double proj = dot(*kernel, x) / c2;
    for (std::size_t i = 0; i < x.size(); ++i) x[i] -= proj * (*kernel)[i];
  };
  deflate(r);

  Vec z(static_cast<std::size_t>(n)), q(static_cast<std::size_t>(n));
  pinv.apply(r, z);
  deflate(z);
  double rho = dot(r, z);
  if (!(rho > 0.0)) throw std::runtime_error("lanczos_extremes: preconditioner not SPD");
  const double rho0 = rho;
  Vec p = z;

  std::vector<double> alphas, betas;
  double prev_alpha = 0.0, prev_beta = 0.0;
  for (int it = 0; it < iterations; ++it) {
    a.apply(p, q);
    const double pq = dot(p, q);
    if (!(pq > 0.0)) break;
    const double alpha = rho / pq;
    for (std::size_t i = 0; i < r.size(); ++i) r[i] -= alpha * q[i];
    pinv.apply(r, z);
    deflate(z);
    const double rho_new = dot(r, z);
    if (!std::isfinite(rho_new)) throw std::runtime_error("lanczos_extremes: breakdown");
    if (rho_new <= 0.0) {
      // Rounding at full convergence; a genuinely indefinite pair shows up
      // as a large negative value instead.
      if (rho_new < -1e-12 * rho0) throw std::runtime_error("lanczos_extremes: not SPD");
      break;
    }
    const double beta = rho_new / rho;
    alphas.push_back(alpha);
    betas.push_back(beta);
    if (rho_new < 1e-24 * rho0) break;
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = z[i] + beta * p[i];
    rho = rho_new;
  }

  const std::size_t m = alphas.size();
  DenseMatrix t(static_cast<Index>(m), static_cast<Index>(m));
  for (std::size_t j = 0; j < m; ++j) {
    double diag = 1.0 / alphas[j];
    if (j > 0) diag += prev_beta / prev_alpha;
    t(static_cast<Index>(j), static_cast<Index>(j)) = diag;
    if (j + 1 < m) {
      const double off = std::sqrt(betas[j]) / alphas[j];
      t(static_cast<Index>(j), static_cast<Index>(j + 1)) = off;
      t(static_cast<Index>(j + 1), static_cast<Index>(j)) = off;
    }
    prev_alpha = alphas[j];
    prev_beta = betas[j];
  }
  EigenDecomposition e = jacobi_eigensolve(t);
  SpectralEstimate est;
  est.iterations = static_cast<int>(m);
  est.lambda_min = e.values.empty() ? 0.0 : e.values.front();
  est.lambda_max = e.values.empty() ? 0.0 : e.values.back();
  return est;
}

/// Fast-diagonalization preconditioner for the velocity block: block
/// diagonal over components, one generalized-Kronecker-sum inverse each.
/// Off-diagonal couplings of the velocity block are ignored here; the
/// hyper-power updates bring them back in.
inline OpPtr make_velocity_fastdiag(const stokes::StokesSystem& system, double omega = 1.0) {
  std::vector<OpPtr> blocks;
  for (int c = 0; c < 3; ++c)
    blocks.push_back(kron::make_fastdiag(*system.velocity_diag[static_cast<std::size_t>(c)]));
  OpPtr p = block_diag(std::move(blocks));
  if (omega != 1.0) p = scaled(omega, p);
  return p;
}

/// Inverse of the scaled pressure mass matrix 1/(2 nu) M3 (x) M2 (x) M1,
/// applied through per-direction Cholesky factors in Kronecker form. The
/// 2 nu matches the viscous form 2 nu (grad^s u, grad^s v): it places the
/// spectrum of the preconditioned Schur complement just below one.
inline OpPtr make_pressure_mass_inverse(const stokes::StokesSpace& space, double nu) {
  if (nu <= 0.0) throw std::invalid_argument("make_pressure_mass_inverse: nu > 0 required");
  std::vector<DenseMatrix> linv_slowest_first, linv_t_slowest_first;
  for (int d = 2; d >= 0; --d) {
    const DenseMatrix& m = space.dir[static_cast<std::size_t>(d)].mass_t;
    auto l = cholesky_factor(m);
    if (!l) throw std::runtime_error("make_pressure_mass_inverse: mass matrix not SPD");
    DenseMatrix linv = forward_subst_matrix(*l, DenseMatrix::identity(m.rows()));
    linv_t_slowest_first.push_back(linv.transposed());
    linv_slowest_first.push_back(std::move(linv));
  }
  OpPtr fwd = kron::make_kron(std::move(linv_t_slowest_first));
  OpPtr bwd = kron::make_kron(std::move(linv_slowest_first));
  return scaled(2.0 * nu, compose(fwd, bwd));
}

namespace detail {

inline void warn_if_outside_unit_interval_of_two(const SpectralEstimate& est, const char* what) {
  if (est.lambda_min <= 0.0 || est.lambda_max >= 2.0)
    std::cerr << "[hpstokes] warning: spectrum estimate of " << what << " is ["
              << est.lambda_min << ", " << est.lambda_max
              << "], outside (0, 2); hyper-power updates may not converge\n";
}

}  // namespace detail

/// P_{V,0..k}: hyper-power sequence for the velocity block using the exact
/// Kronecker-assembled operator as the approximation.
inline std::vector<OpPtr> velocity_sequence(const stokes::StokesSystem& system, int k,
                                            double omega = 1.0, bool precheck = true) {
  if (k < 0) throw std::invalid_argument("velocity_sequence: k >= 0 required");
  std::vector<OpPtr> seq;
  seq.push_back(make_velocity_fastdiag(system, omega));
  if (k >= 1 && precheck)
    detail::warn_if_outside_unit_interval_of_two(
        lanczos_extremes(*system.velocity_op, *seq[0]), "P_V0^{-1} A");
  for (int j = 0; j < k; ++j) seq.push_back(hyperpower_step(seq.back(), system.velocity_op));
  return seq;
}

inline OpPtr schur_approximation(const stokes::StokesSystem& system, OpPtr velocity_inverse) {
  return compose(system.divergence_t, std::move(velocity_inverse), system.divergence_op);
}

/// Schur sequence with inner updates: the first update approximates the
/// inverse velocity block by P_{V,0}^{-1}; the update producing level j >= 2
/// uses P_{V,j}^{-1}. Coincides with the fixed sequence through level 1.
inline std::vector<OpPtr> schur_sequence_updated(const stokes::StokesSystem& system,
                                                 const std::vector<OpPtr>& velocity_seq, int k,
                                                 bool precheck = true) {
  if (k < 0) throw std::invalid_argument("schur_sequence_updated: k >= 0 required");
  if (static_cast<int>(velocity_seq.size()) < k + 1)
    throw std::invalid_argument("schur_sequence_updated: velocity sequence too short");
  std::vector<OpPtr> seq;
  seq.push_back(make_pressure_mass_inverse(*system.space, system.nu));
  if (k >= 1 && precheck) {
    const Vec kernel = system.space->constant_pressure_coefficients();
    auto atilde0 = schur_approximation(system, velocity_seq[0]);
    detail::warn_if_outside_unit_interval_of_two(
        lanczos_extremes(*atilde0, *seq[0], 30, 20240u, &kernel), "P_Q0^{-1} S~");
  }
  for (int j = 0; j < k; ++j) {
    const std::size_t level = (j == 0) ? 0 : static_cast<std::size_t>(j + 1);
    seq.push_back(hyperpower_step(seq.back(), schur_approximation(system, velocity_seq[level])));
  }
  return seq;
}

/// Schur sequence without inner updates: the approximation stays
/// B^T P_{V,0}^{-1} B at every level.
inline std::vector<OpPtr> schur_sequence_fixed(const stokes::StokesSystem& system, int k,
                                               OpPtr velocity_p0 = nullptr,
                                               bool precheck = true) {
  if (k < 0) throw std::invalid_argument("schur_sequence_fixed: k >= 0 required");
  if (!velocity_p0) velocity_p0 = make_velocity_fastdiag(system);
  OpPtr atilde = schur_approximation(system, std::move(velocity_p0));
  std::vector<OpPtr> seq;
  seq.push_back(make_pressure_mass_inverse(*system.space, system.nu));
  if (k >= 1 && precheck) {
    const Vec kernel = system.space->constant_pressure_coefficients();
    detail::warn_if_outside_unit_interval_of_two(
        lanczos_extremes(*atilde, *seq[0], 30, 20240u, &kernel), "P_Q0^{-1} S~ (fixed)");
  }
  for (int j = 0; j < k; ++j) seq.push_back(hyperpower_step(seq.back(), atilde));
  return seq;
}

/// Desk-scale comparison sequence with the exact Schur complement
/// B^T A^{-1} B through a dense factorization of A.
inline std::vector<OpPtr> schur_sequence_exact(const stokes::StokesSystem& system, int k,
                                               Index guard = 5000) {
  if (k < 0) throw std::invalid_argument("schur_sequence_exact: k >= 0 required");
  if (system.n_velocity() > guard)
    throw std::invalid_argument("schur_sequence_exact: velocity block too large for dense factorization");
  DenseMatrix a = materialize(*system.velocity_op, guard);
  auto l = cholesky_factor(symmetrized(a));
  if (!l) throw std::runtime_error("schur_sequence_exact: velocity block not SPD");
  OpPtr ainv = std::make_shared<CholeskySolveOp>(std::move(*l));
  OpPtr atilde = schur_approximation(system, std::move(ainv));
  std::vector<OpPtr> seq;
  seq.push_back(make_pressure_mass_inverse(*system.space, system.nu));
  if (k >= 1) {
    const Vec kernel = system.space->constant_pressure_coefficients();
    detail::warn_if_outside_unit_interval_of_two(
        lanczos_extremes(*atilde, *seq[0], 30, 20240u, &kernel), "P_Q0^{-1} S");
  }
  for (int j = 0; j < k; ++j) seq.push_back(hyperpower_step(seq.back(), atilde));
  return seq;
}

enum class SchurMode { hat, fixed, exact };

/// Block-diagonal saddle preconditioner diag(P_{V,k}, P_{Q,k}).
inline OpPtr block_diag_precond(OpPtr velocity, OpPtr pressure) {
  return block_diag({std::move(velocity), std::move(pressure)});
}

}  // namespace hps::precond
