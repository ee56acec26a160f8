#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>

#include "rcagp/linalg.hpp"

namespace rcagp {

enum class KernelKind { Matern52, RBF };

/// Stationary kernel with per-dimension (ARD) lengthscales and an output scale.
/// Immutable after construction; shared freely across concurrent fits.
struct KernelSpec {
  KernelKind kind = KernelKind::Matern52;
  Vec lengthscale;          // one entry, or one per input dimension
  double outputscale = 1.0;

  static KernelSpec matern52(double ls, double os = 1.0) {
    return {KernelKind::Matern52, Vec::Constant(1, ls), os};
  }
  static KernelSpec rbf(double ls, double os = 1.0) {
    return {KernelKind::RBF, Vec::Constant(1, ls), os};
  }

  void validate() const {
    if (lengthscale.size() == 0 || (lengthscale.array() <= 0.0).any())
      throw std::invalid_argument("kernel lengthscale must be positive");
    if (!(outputscale > 0.0)) throw std::invalid_argument("kernel outputscale must be positive");
  }
};

/// Diagonal jitter added before factorizing Gram-derived systems.
inline double gram_jitter(const KernelSpec& spec) { return 1e-8 * spec.outputscale; }

namespace detail {

inline double scaled_sqdist(const KernelSpec& spec, const Eigen::Ref<const Vec>& a,
                            const Eigen::Ref<const Vec>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("kernel_eval: point dimensions differ");
  const Eigen::Index d = a.size();
  const bool ard = spec.lengthscale.size() > 1;
  if (ard && spec.lengthscale.size() != d)
    throw std::invalid_argument("kernel_eval: lengthscale dimension mismatch");
  double s = 0.0;
  for (Eigen::Index j = 0; j < d; ++j) {
    const double ls = ard ? spec.lengthscale[j] : spec.lengthscale[0];
    const double t = (a[j] - b[j]) / ls;
    s += t * t;
  }
  return s;
}

inline double kernel_of_sqdist(const KernelSpec& spec, double r2) {
  switch (spec.kind) {
    case KernelKind::RBF:
      return spec.outputscale * std::exp(-0.5 * r2);
    case KernelKind::Matern52: {
      const double r = std::sqrt(std::max(r2, 0.0));
      const double a = std::sqrt(5.0) * r;
      return spec.outputscale * (1.0 + a + 5.0 * r2 / 3.0) * std::exp(-a);
    }
  }
  throw std::logic_error("unknown kernel kind");
}

/// Inputs divided by lengthscale, so squared distances come out pre-scaled.
inline Mat scale_inputs(const KernelSpec& spec, const Eigen::Ref<const Mat>& x) {
  Mat out = x;
  if (spec.lengthscale.size() > 1) {
    if (spec.lengthscale.size() != x.cols())
      throw std::invalid_argument("gram: lengthscale dimension mismatch");
    out.array().rowwise() /= spec.lengthscale.transpose().array();
  } else {
    out /= spec.lengthscale[0];
  }
  return out;
}

}  // namespace detail

inline double kernel_eval(const KernelSpec& spec, const Eigen::Ref<const Vec>& a,
                          const Eigen::Ref<const Vec>& b) {
  return detail::kernel_of_sqdist(spec, detail::scaled_sqdist(spec, a, b));
}

/// Dense cross-Gram matrix k(X, X'). Symmetric for X == X' but not jittered;
/// callers add gram_jitter() to the diagonal before factorizing.
inline Mat gram(const KernelSpec& spec, const Eigen::Ref<const Mat>& x,
                const Eigen::Ref<const Mat>& xp) {
  if (x.cols() != xp.cols()) throw std::invalid_argument("gram: point dimensions differ");
  const Mat xs = detail::scale_inputs(spec, x);
  const Mat xps = detail::scale_inputs(spec, xp);
  const Vec xn = xs.rowwise().squaredNorm();
  const Vec xpn = xps.rowwise().squaredNorm();
  Mat r2 = (-2.0 * xs * xps.transpose());
  r2.colwise() += xn;
  r2.rowwise() += xpn.transpose();
  r2 = r2.cwiseMax(0.0);
  Mat out(x.rows(), xp.rows());
  if (spec.kind == KernelKind::RBF) {
    out = spec.outputscale * (-0.5 * r2.array()).exp().matrix();
  } else {
    const Mat r = r2.array().sqrt().matrix();
    const Mat a = std::sqrt(5.0) * r;
    out = spec.outputscale *
          ((1.0 + a.array() + (5.0 / 3.0) * r2.array()) * (-a.array()).exp()).matrix();
  }
  return out;
}

/// Visit the Gram matrix k(X, X) in row chunks without ever materializing it.
/// The callback receives (first_row, rows) where rows is chunk x n.
template <typename F>
void gram_rows_visit(const KernelSpec& spec, const Eigen::Ref<const Mat>& x, Eigen::Index chunk,
                     F&& visit) {
  const Eigen::Index n = x.rows();
  const Mat xs = detail::scale_inputs(spec, x);
  const Vec xn = xs.rowwise().squaredNorm();
  for (Eigen::Index r0 = 0; r0 < n; r0 += chunk) {
    const Eigen::Index m = std::min(chunk, n - r0);
    Mat r2 = -2.0 * xs.middleRows(r0, m) * xs.transpose();
    r2.colwise() += xn.segment(r0, m);
    r2.rowwise() += xn.transpose();
    r2 = r2.cwiseMax(0.0);
    if (spec.kind == KernelKind::RBF) {
      r2 = spec.outputscale * (-0.5 * r2.array()).exp().matrix();
    } else {
      const Mat a = std::sqrt(5.0) * r2.array().sqrt().matrix();
      r2 = spec.outputscale *
           ((1.0 + a.array() + (5.0 / 3.0) * r2.array()) * (-a.array()).exp()).matrix();
    }
    visit(r0, r2);
  }
}

enum class MeanKind { Constant, ExpertGuided };

/// Prior mean: a constant, or a handle into a built expert-prior table.
/// The expert branch is type-erased so this header stays independent of the
/// expert machinery; an unset handle is a state error at evaluation time.
struct MeanSpec {
  MeanKind kind = MeanKind::Constant;
  double value = 0.0;
  std::shared_ptr<const std::function<double(const Eigen::Ref<const Vec>&)>> expert;

  static MeanSpec constant(double v) { return {MeanKind::Constant, v, nullptr}; }
  static MeanSpec expert_guided(
      std::shared_ptr<const std::function<double(const Eigen::Ref<const Vec>&)>> fn) {
    return {MeanKind::ExpertGuided, 0.0, std::move(fn)};
  }
};

inline double mean_eval(const MeanSpec& spec, const Eigen::Ref<const Vec>& x) {
  if (spec.kind == MeanKind::Constant) return spec.value;
  if (!spec.expert) throw std::logic_error("mean_eval: expert prior table not built");
  return (*spec.expert)(x);
}

/// Mean over the rows of a point matrix.
inline Vec mean_eval_rows(const MeanSpec& spec, const Eigen::Ref<const Mat>& x) {
  if (spec.kind == MeanKind::Constant) return Vec::Constant(x.rows(), spec.value);
  Vec out(x.rows());
  for (Eigen::Index j = 0; j < x.rows(); ++j) out[j] = mean_eval(spec, Vec(x.row(j)));
  return out;
}

}  // namespace rcagp
