#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "hpstokes/operator.hpp"
#include "hpstokes/small_dense.hpp"

namespace hps::kron {

/// Flat index of a multi-index under the vec convention: the first direction
/// runs fastest. Indices and the result are 0-based.
inline Index vec_index(std::span<const Index> idx, std::span<const Index> dims) {
  if (idx.size() != dims.size()) throw std::invalid_argument("vec_index: rank mismatch");
  Index flat = 0;
  Index stride = 1;
  for (std::size_t k = 0; k < dims.size(); ++k) {
    if (idx[k] < 0 || idx[k] >= dims[k]) throw std::out_of_range("vec_index: index out of range");
    flat += idx[k] * stride;
    stride *= dims[k];
  }
  return flat;
}

inline Index vec_index(std::initializer_list<Index> idx, std::initializer_list<Index> dims) {
  return vec_index(std::span<const Index>(idx.begin(), idx.size()),
                   std::span<const Index>(dims.begin(), dims.size()));
}

/// Kronecker product operator D_d (x) ... (x) D_1. Factors are stored
/// slowest direction first, matching the vec convention above: factors[0]
/// acts on the slowest (last) tensor direction, factors.back() on the
/// fastest (first). The matrix-vector product runs as d mode-wise tensor
/// contractions over a reused scratch buffer; the full Kronecker matrix is
/// never formed.
class KroneckerOp final : public LinearOperator {
 public:
  explicit KroneckerOp(std::vector<DenseMatrix> factors_slowest_first)
      : LinearOperator(product_rows(factors_slowest_first),
                       product_cols(factors_slowest_first)),
        factors_(std::move(factors_slowest_first)) {
    if (factors_.empty()) throw std::invalid_argument("KroneckerOp: no factors");
  }

  const std::vector<DenseMatrix>& factors() const { return factors_; }

  KroneckerOp transposed() const {
    std::vector<DenseMatrix> t;
    t.reserve(factors_.size());
    for (const DenseMatrix& f : factors_) t.push_back(f.transposed());
    return KroneckerOp(std::move(t));
  }

 private:
  static Index product_rows(const std::vector<DenseMatrix>& fs) {
    Index n = 1;
    for (const auto& f : fs) n *= f.rows();
    return n;
  }
  static Index product_cols(const std::vector<DenseMatrix>& fs) {
    Index n = 1;
    for (const auto& f : fs) n *= f.cols();
    return n;
  }

  void do_apply(std::span<const double> x, std::span<double> y) const override {
    const std::size_t d = factors_.size();
    detail::WorkBuffer buf_a(x.size());
    detail::WorkBuffer buf_b(0);

    std::span<const double> cur = x;
    // Contract the fastest direction first; factor for direction k (1-based,
    // k=1 fastest) sits at factors_[d-k]. The last contraction writes the
    // result span directly.
    Index left = 1;
    Index right = 1;
    for (std::size_t k = 1; k < d; ++k) right *= factors_[d - 1 - k].cols();

    for (std::size_t k = 0; k < d; ++k) {
      const DenseMatrix& f = factors_[d - 1 - k];
      const Index m = f.rows();
      const Index n = f.cols();
      std::span<double> out;
      if (k + 1 == d) {
        out = y;
      } else {
        detail::WorkBuffer& target = (k % 2 == 0) ? buf_a : buf_b;
        out = target.ensure(static_cast<std::size_t>(left * m * right));
      }
      contract_mode(f, cur, out, left, right);
      flops::add(static_cast<std::uint64_t>(2 * m * n * left * right));
      cur = out;
      left *= m;
      if (k + 1 < d) right /= factors_[d - 1 - (k + 1)].cols();
    }
  }

  // Y[l, a, r] = sum_b F[a, b] X[l, b, r] with l the fast contiguous index.
  static void contract_mode(const DenseMatrix& f, std::span<const double> x,
                            std::span<double> y, Index left, Index right) {
    const Index m = f.rows();
    const Index n = f.cols();
    if (left == 1) {
      for (Index r = 0; r < right; ++r) {
        const double* xr = x.data() + r * n;
        double* yr = y.data() + r * m;
        for (Index a = 0; a < m; ++a) {
          double s = 0.0;
          for (Index b = 0; b < n; ++b) s += f(a, b) * xr[b];
          yr[a] = s;
        }
      }
      return;
    }
    std::fill(y.begin(), y.end(), 0.0);
    for (Index r = 0; r < right; ++r) {
      const double* xr = x.data() + r * left * n;
      double* yr = y.data() + r * left * m;
      for (Index a = 0; a < m; ++a) {
        double* ya = yr + a * left;
        for (Index b = 0; b < n; ++b) {
          const double c = f(a, b);
          const double* xb = xr + b * left;
          for (Index l = 0; l < left; ++l) ya[l] += c * xb[l];
        }
      }
    }
  }

  std::vector<DenseMatrix> factors_;
};

inline OpPtr make_kron(std::vector<DenseMatrix> factors_slowest_first) {
  return std::make_shared<KroneckerOp>(std::move(factors_slowest_first));
}

/// One (A_k, M_k) pair of a generalized Kronecker sum; the A_k factor is the
/// stiffness-like matrix for direction k, M_k the mass partner used in the
/// other terms.
struct KronSumTerm {
  DenseMatrix a;
  DenseMatrix m;
};

/// A_1 (+) A_2 (+) ... (+) A_d in the generalized sense: term k is the
/// Kronecker product with A_k in slot k and the mass partners elsewhere.
/// Terms are stored by direction, fastest first.
class GeneralizedKronSum final : public LinearOperator {
 public:
  explicit GeneralizedKronSum(std::vector<KronSumTerm> terms)
      : LinearOperator(total_size(terms), total_size(terms)), terms_(std::move(terms)) {
    const std::size_t d = terms_.size();
    summands_.reserve(d);
    for (std::size_t k = 0; k < d; ++k) {
      std::vector<DenseMatrix> factors;
      factors.reserve(d);
      for (std::size_t j = d; j-- > 0;)
        factors.push_back(j == k ? terms_[j].a : terms_[j].m);
      summands_.push_back(std::make_unique<KroneckerOp>(std::move(factors)));
    }
  }

  const std::vector<KronSumTerm>& terms() const { return terms_; }

 private:
  static Index total_size(const std::vector<KronSumTerm>& terms) {
    if (terms.empty()) throw std::invalid_argument("GeneralizedKronSum: no terms");
    Index n = 1;
    for (const auto& t : terms) {
      if (t.a.rows() != t.a.cols() || t.m.rows() != t.m.cols() || t.a.rows() != t.m.rows())
        throw std::invalid_argument("GeneralizedKronSum: factors must be square and conforming");
      n *= t.a.rows();
    }
    return n;
  }

  void do_apply(std::span<const double> x, std::span<double> y) const override {
    detail::WorkBuffer t(y.size());
    summands_[0]->apply(x, y);
    for (std::size_t k = 1; k < summands_.size(); ++k) {
      summands_[k]->apply(x, t.span());
      axpy(1.0, t.span(), y);
      flops::add(static_cast<std::uint64_t>(y.size()));
    }
  }

  std::vector<KronSumTerm> terms_;
  std::vector<std::unique_ptr<KroneckerOp>> summands_;
};

inline OpPtr make_kron_sum(std::vector<KronSumTerm> terms) {
  return std::make_shared<GeneralizedKronSum>(std::move(terms));
}

/// Direct inverse of a generalized Kronecker sum by per-direction
/// generalized eigendecomposition: with M_k = L_k L_k^T and
/// L_k^{-1} A_k L_k^{-T} = U_k Lambda_k U_k^T, the sum factors as
/// (U~_d (x) ... (x) U~_1)^{-T} diag(lambda) (U~_d (x) ... (x) U~_1)^{-1}
/// where U~_k = L_k^{-T} U_k, so the solver applies
///   x = (U~ kron) diag(lambda)^{-1} (U~^T kron) b
/// with U~_k^T = U_k^T L_k^{-1}. Only the small univariate triangular
/// factors are ever inverted.
class FastDiagSolver final : public LinearOperator {
 public:
  explicit FastDiagSolver(const GeneralizedKronSum& sum)
      : LinearOperator(sum.rows(), sum.cols()) {
    const auto& terms = sum.terms();
    const std::size_t d = terms.size();
    std::vector<DenseMatrix> fwd(d), inv(d);
    std::vector<Vec> lambdas(d);
    for (std::size_t k = 0; k < d; ++k) {
      if (symmetry_defect(terms[k].a) > 1e-11 * std::max(terms[k].a.max_abs(), 1.0))
        throw std::invalid_argument("FastDiagSolver: stiffness factor not symmetric");
      auto l = cholesky_factor(terms[k].m);
      if (!l) throw std::runtime_error("FastDiagSolver: mass factor not SPD (Cholesky failed)");
      // S = L^{-1} A L^{-T}, computed with triangular solves only.
      DenseMatrix s = forward_subst_matrix(*l, terms[k].a);
      s = forward_subst_matrix(*l, s.transposed());
      EigenDecomposition e = jacobi_eigensolve(s);
      lambdas[k] = e.values;
      fwd[k] = back_subst_transposed_matrix(*l, e.vectors);  // U~ = L^{-T} U
      inv[k] = e.vectors.transposed() *
               forward_subst_matrix(*l, DenseMatrix::identity(l->rows()));  // U~^T
    }

    // Diagonal of the regular Kronecker sum of the eigenvalue matrices.
    diag_.assign(static_cast<std::size_t>(rows()), 0.0);
    Index stride = 1;
    for (std::size_t k = 0; k < d; ++k) {
      const Index nk = static_cast<Index>(lambdas[k].size());
      for (Index i = 0; i < rows(); ++i) {
        const Index ik = (i / stride) % nk;
        diag_[static_cast<std::size_t>(i)] += lambdas[k][static_cast<std::size_t>(ik)];
      }
      stride *= nk;
    }
    double dmax = 0.0;
    for (double v : diag_) dmax = std::max(dmax, std::abs(v));
    for (double v : diag_)
      if (std::abs(v) <= 1e-12 * dmax)
        throw std::runtime_error("FastDiagSolver: singular operator (zero eigenvalue)");

    std::vector<DenseMatrix> fwd_slowest_first(fwd.rbegin(), fwd.rend());
    std::vector<DenseMatrix> inv_slowest_first(inv.rbegin(), inv.rend());
    forward_ = std::make_unique<KroneckerOp>(std::move(fwd_slowest_first));
    inverse_ = std::make_unique<KroneckerOp>(std::move(inv_slowest_first));
  }

  std::span<const double> eigenvalues() const { return diag_; }

 private:
  void do_apply(std::span<const double> b, std::span<double> x) const override {
    detail::WorkBuffer t(b.size());
    inverse_->apply(b, t.span());
    for (std::size_t i = 0; i < t.span().size(); ++i) t.span()[i] /= diag_[i];
    flops::add(static_cast<std::uint64_t>(b.size()));
    forward_->apply(t.span(), x);
  }

  std::unique_ptr<KroneckerOp> forward_;
  std::unique_ptr<KroneckerOp> inverse_;
  Vec diag_;
};

inline OpPtr make_fastdiag(const GeneralizedKronSum& sum) {
  return std::make_shared<FastDiagSolver>(sum);
}

}  // namespace hps::kron
