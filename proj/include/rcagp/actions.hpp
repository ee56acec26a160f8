#pragma once

#include <stdexcept>
#include <vector>

#include "rcagp/kernels.hpp"

namespace rcagp {

enum class ActionKind { InducingKernel, SparseBlock, Dense };

/// Action set S (n x i) of the probabilistic linear solver. Three shapes:
/// kernel columns at inducing locations, trainable sparse blocks with
/// k = n/i contiguous non-zeros per column (last block absorbs any
/// remainder), or an explicit dense matrix.
struct ActionMatrix {
  ActionKind kind = ActionKind::Dense;
  Eigen::Index n = 0;
  Eigen::Index i = 0;
  Mat z;       // InducingKernel: i locations (i x d)
  Vec values;  // SparseBlock: n trainable entries, column j owns a contiguous slice
  Mat dense;   // Dense: explicit n x i

  /// Row range [offset(j), offset(j+1)) owned by sparse-block column j.
  Eigen::Index block_offset(Eigen::Index j) const {
    const Eigen::Index k = n / i;
    return j >= i ? n : j * k;
  }

  static ActionMatrix inducing(const Mat& z, Eigen::Index n) {
    if (z.rows() < 1) throw std::invalid_argument("build_actions: need at least one action");
    if (z.rows() > n) throw std::invalid_argument("build_actions: more actions than points");
    ActionMatrix a;
    a.kind = ActionKind::InducingKernel;
    a.n = n;
    a.i = z.rows();
    a.z = z;
    return a;
  }

  static ActionMatrix sparse_block(Eigen::Index n, Eigen::Index i) {
    if (i < 1) throw std::invalid_argument("build_actions: need at least one action");
    if (i > n) throw std::invalid_argument("build_actions: more actions than points");
    ActionMatrix a;
    a.kind = ActionKind::SparseBlock;
    a.n = n;
    a.i = i;
    a.values = Vec::Ones(n);  // uniform aggregation before optimization
    return a;
  }

  static ActionMatrix from_dense(const Mat& m) {
    if (m.cols() < 1) throw std::invalid_argument("build_actions: need at least one action");
    if (m.cols() > m.rows()) throw std::invalid_argument("build_actions: more actions than points");
    ActionMatrix a;
    a.kind = ActionKind::Dense;
    a.n = m.rows();
    a.i = m.cols();
    a.dense = m;
    return a;
  }

  static ActionMatrix identity(Eigen::Index n) { return from_dense(Mat::Identity(n, n)); }
};

/// Concrete view of S against a fixed training set and kernel. Sparse-block
/// structure is kept sparse through every product.
class ActionView {
 public:
  ActionView() = default;

  static ActionView materialize(const ActionMatrix& a, const Eigen::Ref<const Mat>& x,
                                const KernelSpec& kernel) {
    ActionView v;
    v.n_ = a.n;
    v.i_ = a.i;
    if (a.n != x.rows()) throw std::invalid_argument("actions: size does not match training set");
    switch (a.kind) {
      case ActionKind::InducingKernel:
        v.dense_ = gram(kernel, x, a.z);
        break;
      case ActionKind::Dense:
        v.dense_ = a.dense;
        break;
      case ActionKind::SparseBlock: {
        v.sparse_ = true;
        v.values_ = a.values;
        v.offsets_.resize(a.i + 1);
        for (Eigen::Index j = 0; j <= a.i; ++j) v.offsets_[j] = a.block_offset(j);
        break;
      }
    }
    return v;
  }

  Eigen::Index rows() const { return n_; }
  Eigen::Index cols() const { return i_; }
  bool sparse() const { return sparse_; }

  /// S' v
  Vec st_times(const Eigen::Ref<const Vec>& v) const {
    if (!sparse_) return dense_.transpose() * v;
    Vec out(i_);
    for (Eigen::Index j = 0; j < i_; ++j) {
      const auto b = offsets_[j], e = offsets_[j + 1];
      out[j] = values_.segment(b, e - b).dot(v.segment(b, e - b));
    }
    return out;
  }

  /// S u
  Vec s_times(const Eigen::Ref<const Vec>& u) const {
    if (!sparse_) return dense_ * u;
    Vec out = Vec::Zero(n_);
    for (Eigen::Index j = 0; j < i_; ++j) {
      const auto b = offsets_[j], e = offsets_[j + 1];
      out.segment(b, e - b) = values_.segment(b, e - b) * u[j];
    }
    return out;
  }

  /// rows [r0, r0+m) of K times S, for a chunk of Gram rows.
  Mat rows_times(const Eigen::Ref<const Mat>& k_rows) const {
    if (!sparse_) return k_rows * dense_;
    Mat out(k_rows.rows(), i_);
    for (Eigen::Index j = 0; j < i_; ++j) {
      const auto b = offsets_[j], e = offsets_[j + 1];
      out.col(j) = k_rows.middleCols(b, e - b) * values_.segment(b, e - b);
    }
    return out;
  }

  /// S[r0:r0+m, :]' B for a row chunk, accumulating S' K S.
  Mat rows_transpose_times(Eigen::Index r0, const Eigen::Ref<const Mat>& b) const {
    if (!sparse_) return dense_.middleRows(r0, b.rows()).transpose() * b;
    Mat out = Mat::Zero(i_, b.cols());
    const Eigen::Index r1 = r0 + b.rows();
    for (Eigen::Index j = 0; j < i_; ++j) {
      const auto lo = std::max(offsets_[j], r0), hi = std::min(offsets_[j + 1], r1);
      if (lo >= hi) continue;
      out.row(j) = values_.segment(lo, hi - lo).transpose() * b.middleRows(lo - r0, hi - lo);
    }
    return out;
  }

  /// S' diag(d) S
  Mat st_diag_s(const Eigen::Ref<const Vec>& d) const {
    if (!sparse_) return dense_.transpose() * d.asDiagonal() * dense_;
    Mat out = Mat::Zero(i_, i_);
    for (Eigen::Index j = 0; j < i_; ++j) {
      const auto b = offsets_[j], e = offsets_[j + 1];
      out(j, j) = (values_.segment(b, e - b).array().square() * d.segment(b, e - b).array()).sum();
    }
    return out;
  }

  /// Dense copy, for diagnostics-grade paths only.
  Mat to_dense() const {
    if (!sparse_) return dense_;
    Mat out = Mat::Zero(n_, i_);
    for (Eigen::Index j = 0; j < i_; ++j) {
      const auto b = offsets_[j], e = offsets_[j + 1];
      out.col(j).segment(b, e - b) = values_.segment(b, e - b);
    }
    return out;
  }

 private:
  bool sparse_ = false;
  Eigen::Index n_ = 0, i_ = 0;
  Mat dense_;
  Vec values_;
  std::vector<Eigen::Index> offsets_;
};

/// Projections of the Gram matrix through the actions, assembled in row
/// chunks so no n x n matrix ever exists.
struct GramProjections {
  Mat stks;  // S' K S (i x i)
  Mat w;     // K S (n x i), only when requested
};

inline GramProjections project_gram(const KernelSpec& kernel, const Eigen::Ref<const Mat>& x,
                                    const ActionView& s, bool need_w,
                                    Eigen::Index chunk = 256) {
  GramProjections out;
  out.stks = Mat::Zero(s.cols(), s.cols());
  if (need_w) out.w.resize(s.rows(), s.cols());
  gram_rows_visit(kernel, x, chunk, [&](Eigen::Index r0, const Mat& k_rows) {
    const Mat b = s.rows_times(k_rows);
    out.stks += s.rows_transpose_times(r0, b);
    if (need_w) out.w.middleRows(r0, b.rows()) = b;
  });
  out.stks = 0.5 * (out.stks + out.stks.transpose()).eval();
  return out;
}

inline ActionMatrix build_actions_inducing(const Mat& z, Eigen::Index n) {
  return ActionMatrix::inducing(z, n);
}
inline ActionMatrix build_actions_sparse_block(Eigen::Index n, Eigen::Index i) {
  return ActionMatrix::sparse_block(n, i);
}
inline ActionMatrix build_actions_dense(const Mat& m) { return ActionMatrix::from_dense(m); }

}  // namespace rcagp
