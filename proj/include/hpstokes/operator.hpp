#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "hpstokes/small_dense.hpp"

namespace hps {

/// Floating point operation accounting. Primitive operators add to a
/// thread-local accumulator so a whole operator graph can be measured by
/// taking a delta around one apply.
namespace flops {

inline std::uint64_t& counter() {
  thread_local std::uint64_t c = 0;
  return c;
}

inline void add(std::uint64_t n) { counter() += n; }
inline std::uint64_t current() { return counter(); }

template <typename F>
std::uint64_t measure(F&& f) {
  const std::uint64_t before = current();
  f();
  return current() - before;
}

}  // namespace flops

namespace detail {

/// Thread-local free list of scratch vectors so nested operator applies
/// neither allocate nor re-initialize memory on the hot path. Buffers only
/// ever grow; the lease hands out a span of the requested length.
class WorkBuffer {
 public:
  explicit WorkBuffer(std::size_t n) : buf_(acquire()) { ensure(n); }
  WorkBuffer(const WorkBuffer&) = delete;
  WorkBuffer& operator=(const WorkBuffer&) = delete;
  ~WorkBuffer() { pool().push_back(std::move(buf_)); }

  std::span<double> ensure(std::size_t n) {
    if (buf_.size() < n) buf_.resize(n);
    len_ = n;
    return span();
  }
  std::span<double> span() { return {buf_.data(), len_}; }

 private:
  static std::vector<Vec>& pool() {
    thread_local std::vector<Vec> p;
    return p;
  }
  static Vec acquire() {
    auto& p = pool();
    if (p.empty()) return Vec{};
    Vec v = std::move(p.back());
    p.pop_back();
    return v;
  }
  Vec buf_;
  std::size_t len_ = 0;
};

}  // namespace detail

/// Abstract "apply to a vector" interface. Every block, preconditioner and
/// Schur approximation in this library is one of these. Operators are
/// immutable after construction; the apply counter uses relaxed atomics so
/// concurrent read-only applies stay safe.
class LinearOperator {
 public:
  LinearOperator(Index rows, Index cols) : rows_(rows), cols_(cols) {
    if (rows < 0 || cols < 0) throw std::invalid_argument("LinearOperator: negative size");
  }
  virtual ~LinearOperator() = default;

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }

  void apply(std::span<const double> x, std::span<double> y) const {
    if (static_cast<Index>(x.size()) != cols_ || static_cast<Index>(y.size()) != rows_)
      throw std::invalid_argument("LinearOperator::apply: dimension mismatch");
    applies_.fetch_add(1, std::memory_order_relaxed);
    do_apply(x, y);
  }

  Vec apply(std::span<const double> x) const {
    Vec y(static_cast<std::size_t>(rows_));
    apply(x, y);
    return y;
  }

  std::uint64_t apply_count() const { return applies_.load(std::memory_order_relaxed); }
  void reset_apply_count() const { applies_.store(0, std::memory_order_relaxed); }

 protected:
  virtual void do_apply(std::span<const double> x, std::span<double> y) const = 0;

 private:
  Index rows_;
  Index cols_;
  mutable std::atomic<std::uint64_t> applies_{0};
};

using OpPtr = std::shared_ptr<const LinearOperator>;

class IdentityOp final : public LinearOperator {
 public:
  explicit IdentityOp(Index n) : LinearOperator(n, n) {}

 private:
  void do_apply(std::span<const double> x, std::span<double> y) const override {
    std::copy(x.begin(), x.end(), y.begin());
  }
};

class DenseOp final : public LinearOperator {
 public:
  explicit DenseOp(DenseMatrix a) : LinearOperator(a.rows(), a.cols()), a_(std::move(a)) {}

  const DenseMatrix& matrix() const { return a_; }

 private:
  void do_apply(std::span<const double> x, std::span<double> y) const override {
    for (Index i = 0; i < a_.rows(); ++i) {
      double s = 0.0;
      for (Index j = 0; j < a_.cols(); ++j) s += a_(i, j) * x[static_cast<std::size_t>(j)];
      y[static_cast<std::size_t>(i)] = s;
    }
    flops::add(static_cast<std::uint64_t>(2 * a_.rows() * a_.cols()));
  }

  DenseMatrix a_;
};

class ScaledOp final : public LinearOperator {
 public:
  ScaledOp(double alpha, OpPtr op)
      : LinearOperator(op->rows(), op->cols()), alpha_(alpha), op_(std::move(op)) {}

 private:
  void do_apply(std::span<const double> x, std::span<double> y) const override {
    op_->apply(x, y);
    for (double& v : y) v *= alpha_;
    flops::add(static_cast<std::uint64_t>(y.size()));
  }

  double alpha_;
  OpPtr op_;
};

/// y = A (B x); sizes must conform.
class ProductOp final : public LinearOperator {
 public:
  ProductOp(OpPtr a, OpPtr b)
      : LinearOperator(a->rows(), b->cols()), a_(std::move(a)), b_(std::move(b)) {
    if (a_->cols() != b_->rows()) throw std::invalid_argument("ProductOp: dimension mismatch");
  }

 private:
  void do_apply(std::span<const double> x, std::span<double> y) const override {
    detail::WorkBuffer t(static_cast<std::size_t>(b_->rows()));
    b_->apply(x, t.span());
    a_->apply(t.span(), y);
  }

  OpPtr a_;
  OpPtr b_;
};

inline OpPtr compose(OpPtr a, OpPtr b) {
  return std::make_shared<ProductOp>(std::move(a), std::move(b));
}

inline OpPtr compose(OpPtr a, OpPtr b, OpPtr c) {
  return compose(std::move(a), compose(std::move(b), std::move(c)));
}

inline OpPtr scaled(double alpha, OpPtr op) {
  return std::make_shared<ScaledOp>(alpha, std::move(op));
}

/// Block operator given as a row-major grid of sub-operators; nullptr means
/// a zero block. Covers the velocity block (3x3), the divergence block
/// (3x1 / 1x3) and the saddle matrix (2x2).
class BlockOperator final : public LinearOperator {
 public:
  BlockOperator(std::vector<Index> row_sizes, std::vector<Index> col_sizes,
                std::vector<OpPtr> blocks)
      : LinearOperator(std::accumulate(row_sizes.begin(), row_sizes.end(), Index{0}),
                       std::accumulate(col_sizes.begin(), col_sizes.end(), Index{0})),
        row_sizes_(std::move(row_sizes)),
        col_sizes_(std::move(col_sizes)),
        blocks_(std::move(blocks)) {
    if (blocks_.size() != row_sizes_.size() * col_sizes_.size())
      throw std::invalid_argument("BlockOperator: grid size mismatch");
    for (std::size_t i = 0; i < row_sizes_.size(); ++i)
      for (std::size_t j = 0; j < col_sizes_.size(); ++j) {
        const OpPtr& b = block(i, j);
        if (!b) continue;
        if (b->rows() != row_sizes_[i] || b->cols() != col_sizes_[j])
          throw std::invalid_argument("BlockOperator: block dimension mismatch");
      }
  }

  const OpPtr& block(std::size_t i, std::size_t j) const {
    return blocks_[i * col_sizes_.size() + j];
  }

 private:
  void do_apply(std::span<const double> x, std::span<double> y) const override {
    detail::WorkBuffer t(0);
    Index row_off = 0;
    for (std::size_t i = 0; i < row_sizes_.size(); ++i) {
      auto yi = y.subspan(static_cast<std::size_t>(row_off), static_cast<std::size_t>(row_sizes_[i]));
      bool first = true;
      Index col_off = 0;
      for (std::size_t j = 0; j < col_sizes_.size(); ++j) {
        const OpPtr& b = block(i, j);
        if (b) {
          auto xj = x.subspan(static_cast<std::size_t>(col_off),
                              static_cast<std::size_t>(col_sizes_[j]));
          if (first) {
            b->apply(xj, yi);
            first = false;
          } else {
            auto ts = t.ensure(static_cast<std::size_t>(row_sizes_[i]));
            b->apply(xj, ts);
            axpy(1.0, ts, yi);
            flops::add(static_cast<std::uint64_t>(row_sizes_[i]));
          }
        }
        col_off += col_sizes_[j];
      }
      if (first) std::fill(yi.begin(), yi.end(), 0.0);
      row_off += row_sizes_[i];
    }
  }

  std::vector<Index> row_sizes_;
  std::vector<Index> col_sizes_;
  std::vector<OpPtr> blocks_;
};

inline OpPtr block_diag(std::vector<OpPtr> ops) {
  std::vector<Index> rows, cols;
  for (const OpPtr& op : ops) {
    rows.push_back(op->rows());
    cols.push_back(op->cols());
  }
  const std::size_t n = ops.size();
  std::vector<OpPtr> grid(n * n);
  for (std::size_t i = 0; i < n; ++i) grid[i * n + i] = ops[i];
  return std::make_shared<BlockOperator>(std::move(rows), std::move(cols), std::move(grid));
}

/// Applies the inverse of an SPD matrix through its Cholesky factor.
class CholeskySolveOp final : public LinearOperator {
 public:
  explicit CholeskySolveOp(DenseMatrix lower)
      : LinearOperator(lower.rows(), lower.rows()), l_(std::move(lower)) {}

 private:
  void do_apply(std::span<const double> x, std::span<double> y) const override {
    std::copy(x.begin(), x.end(), y.begin());
    forward_subst(l_, y);
    back_subst_transposed(l_, y);
    flops::add(static_cast<std::uint64_t>(2 * l_.rows() * l_.rows()));
  }

  DenseMatrix l_;
};

/// Columns are the operator applied to unit vectors. Guarded: dense
/// materialization is a desk-scale verification tool only.
inline DenseMatrix materialize(const LinearOperator& op, Index guard = 5000) {
  if (op.rows() > guard || op.cols() > guard)
    throw std::invalid_argument("materialize: size guard exceeded");
  DenseMatrix a(op.rows(), op.cols());
  Vec e(static_cast<std::size_t>(op.cols()), 0.0);
  Vec col(static_cast<std::size_t>(op.rows()));
  for (Index j = 0; j < op.cols(); ++j) {
    e[static_cast<std::size_t>(j)] = 1.0;
    op.apply(e, col);
    for (Index i = 0; i < op.rows(); ++i) a(i, j) = col[static_cast<std::size_t>(i)];
    e[static_cast<std::size_t>(j)] = 0.0;
  }
  return a;
}

inline DenseMatrix materialize(const OpPtr& op, Index guard = 5000) {
  return materialize(*op, guard);
}

}  // namespace hps
