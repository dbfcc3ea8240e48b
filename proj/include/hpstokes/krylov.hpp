#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "hpstokes/operator.hpp"

namespace hps::krylov {

struct SolveStats {
  int iterations = 0;
  bool converged = false;
  Vec residual_history;  // preconditioned residual norms, starting at iteration 0
  std::uint64_t op_applies = 0;
  std::uint64_t precond_applies = 0;
  double wall_seconds = 0.0;
  double final_relative_residual = 0.0;  // preconditioned, relative to iteration 0
  double true_relative_residual = 0.0;   // ||b - A x|| / ||b||, unpreconditioned
};

struct MinresResult {
  Vec x;
  SolveStats stats;
};

/// Preconditioned MINRES for a symmetric (possibly indefinite) operator with
/// an SPD preconditioner. Zero initial guess; stops when the preconditioned
/// residual norm drops below tol relative to the initial one.
inline MinresResult minres(const LinearOperator& op, const LinearOperator& precond,
                           std::span<const double> b, double tol = 1e-8, Index maxit = -1) {
  const Index n = op.rows();
  if (op.cols() != n || precond.rows() != n || precond.cols() != n ||
      static_cast<Index>(b.size()) != n)
    throw std::invalid_argument("minres: dimension mismatch");
  if (!(tol > 0.0)) throw std::invalid_argument("minres: tol > 0 required");
  if (maxit < 0) maxit = 10 * n;

  const auto t0 = std::chrono::steady_clock::now();
  MinresResult out;
  out.x.assign(static_cast<std::size_t>(n), 0.0);
  SolveStats& st = out.stats;

  Vec r1(b.begin(), b.end());
  Vec y(static_cast<std::size_t>(n));
  precond.apply(r1, y);
  ++st.precond_applies;
  double beta1 = dot(r1, y);
  if (beta1 < 0.0) throw std::runtime_error("minres: preconditioner is not positive definite");
  if (beta1 == 0.0) {
    st.converged = true;
    st.residual_history = {0.0};
    st.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
  }
  beta1 = std::sqrt(beta1);

  double oldb = 0.0, beta = beta1, dbar = 0.0, epsln = 0.0, phibar = beta1;
  double cs = -1.0, sn = 0.0;
  Vec r2 = r1;
  Vec v(static_cast<std::size_t>(n)), w(static_cast<std::size_t>(n), 0.0);
  Vec w1(static_cast<std::size_t>(n), 0.0), w2(static_cast<std::size_t>(n), 0.0);
  Vec t(static_cast<std::size_t>(n));

  st.residual_history.push_back(1.0);

  for (Index itn = 1; itn <= maxit; ++itn) {
    const double s = 1.0 / beta;
    for (Index i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = s * y[static_cast<std::size_t>(i)];

    op.apply(v, t);
    ++st.op_applies;
    if (itn >= 2) axpy(-beta / oldb, r1, t);
    const double alfa = dot(v, t);
    axpy(-alfa / beta, r2, t);
    r1 = r2;
    r2 = t;
    precond.apply(r2, y);
    ++st.precond_applies;
    oldb = beta;
    beta = dot(r2, y);
    if (beta < 0.0) throw std::runtime_error("minres: preconditioner is not positive definite");
    beta = std::sqrt(beta);
    if (!std::isfinite(beta) || !std::isfinite(alfa))
      throw std::runtime_error("minres: non-finite values encountered");

    const double oldeps = epsln;
    const double delta = cs * dbar + sn * alfa;
    const double gbar = sn * dbar - cs * alfa;
    epsln = sn * beta;
    dbar = -cs * beta;
    double gamma = std::sqrt(gbar * gbar + beta * beta);
    gamma = std::max(gamma, std::numeric_limits<double>::epsilon());
    cs = gbar / gamma;
    sn = beta / gamma;
    const double phi = cs * phibar;
    phibar = sn * phibar;

    w1 = w2;
    w2 = w;
    for (Index i = 0; i < n; ++i) {
      const std::size_t k = static_cast<std::size_t>(i);
      w[k] = (v[k] - oldeps * w1[k] - delta * w2[k]) / gamma;
      out.x[k] += phi * w[k];
    }

    st.iterations = static_cast<int>(itn);
    const double relres = phibar / beta1;
    st.residual_history.push_back(relres);
    if (relres <= tol) {
      st.converged = true;
      break;
    }
    if (beta == 0.0)
      throw std::runtime_error("minres: Lanczos breakdown with nonzero residual");
  }

  st.final_relative_residual = st.residual_history.back();

  Vec ax(static_cast<std::size_t>(n));
  op.apply(out.x, ax);
  double rn = 0.0;
  for (Index i = 0; i < n; ++i) {
    const std::size_t k = static_cast<std::size_t>(i);
    const double d = b[k] - ax[k];
    rn += d * d;
  }
  const double bn = norm2(b);
  st.true_relative_residual = (bn > 0.0) ? std::sqrt(rn) / bn : 0.0;
  st.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace hps::krylov
