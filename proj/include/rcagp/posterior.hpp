#pragma once

#include <optional>
#include <string>
#include <utility>

#include "rcagp/actions.hpp"
#include "rcagp/hyperparams.hpp"

namespace rcagp {

enum class ModelKind { ExactGP, RCGP, CaGP, RCaGP };

inline const char* model_name(ModelKind m) {
  switch (m) {
    case ModelKind::ExactGP: return "gp";
    case ModelKind::RCGP: return "rcgp";
    case ModelKind::CaGP: return "cagp";
    case ModelKind::RCaGP: return "rcagp";
  }
  return "?";
}

inline bool model_is_robust(ModelKind m) {
  return m == ModelKind::RCGP || m == ModelKind::RCaGP;
}
inline bool model_is_projected(ModelKind m) {
  return m == ModelKind::CaGP || m == ModelKind::RCaGP;
}

/// Predictive distribution at one point. var_total is the combined
/// uncertainty k_hat; the decomposition into mathematical and computational
/// parts is only populated by variance_decomposition (dense, diagnostics).
struct PredictiveDist {
  double mean = 0.0;
  double var_total = 0.0;
  std::optional<double> var_math;
  std::optional<double> var_comp;
};

/// Fitted model. Projected models keep only S, the i x i Cholesky of
/// S' Ktilde S and the representer weights; the n x n system is never formed.
/// Dense baselines keep the full Cholesky instead. Immutable after fit.
struct PosteriorState {
  ModelKind model = ModelKind::RCaGP;
  Mat x_train;
  Vec y_train;
  Hyperparams theta;
  MeanSpec mean;
  WeightedNoise weighted;
  Vec v_tilde;             // representer weights, length n
  ActionMatrix actions;    // as configured (projected models)
  ActionView s;            // materialized actions
  Eigen::LLT<Mat> chol_proj;  // S' Ktilde S (projected) -- empty when i == 0
  Eigen::LLT<Mat> chol_full;  // Ktilde (dense baselines only)
  bool projected = false;
  bool prior_only = false;    // n == 0 or i == 0

  Eigen::Index n() const { return x_train.rows(); }
  Eigen::Index num_actions() const { return projected ? s.cols() : n(); }

  /// Diagonal of Ktilde = K + sigma^2 J_w (plus jitter), given K's diagonal
  /// equals the outputscale for stationary kernels.
  Vec ktilde_diag_shift() const {
    return theta.sigma2 * weighted.jw_diag.array() + gram_jitter(theta.kernel);
  }
};

namespace detail {

inline WeightedNoise noise_for_model(ModelKind model, const Eigen::Ref<const Vec>& y,
                                     const Eigen::Ref<const Vec>& m, const Hyperparams& theta) {
  if (model_is_robust(model)) return build_weighted_noise(y, m, theta.sigma2, theta.robust);
  RobustConfig cw = RobustConfig::constant_weight();
  return build_weighted_noise(y, m, theta.sigma2, cw);
}

}  // namespace detail

/// Fit any of the four variants. Dense baselines (ExactGP, RCGP) ignore the
/// action matrix and solve the full system; projected models (CaGP, RCaGP)
/// factor S' Ktilde S, with Ktilde = K + sigma^2 J_w.
inline PosteriorState fit(ModelKind model, const Eigen::Ref<const Mat>& x,
                          const Eigen::Ref<const Vec>& y, const Hyperparams& theta,
                          const MeanSpec& mean, const ActionMatrix& actions) {
  theta.validate();
  if (x.rows() != y.size()) throw std::invalid_argument("fit: X and y sizes differ");
  PosteriorState st;
  st.model = model;
  st.x_train = x;
  st.y_train = y;
  st.theta = theta;
  st.mean = mean;
  st.projected = model_is_projected(model);

  const Eigen::Index n = x.rows();
  if (n == 0) {
    st.prior_only = true;
    st.v_tilde.resize(0);
    return st;
  }

  const Vec m = mean_eval_rows(mean, x);
  st.weighted = detail::noise_for_model(model, y, m, theta);
  const Vec residual = y - st.weighted.m_w;
  const Vec shift = st.ktilde_diag_shift();

  if (!st.projected) {
    Mat ktilde = gram(theta.kernel, x, x);
    ktilde.diagonal() += shift;
    st.chol_full = chol_spd(ktilde, "fit: Ktilde");
    st.v_tilde = st.chol_full.solve(residual);
    return st;
  }

  st.actions = actions;
  if (actions.i == 0 || actions.n == 0) {
    st.prior_only = true;
    st.v_tilde = Vec::Zero(n);
    return st;
  }
  st.s = ActionView::materialize(actions, x, theta.kernel);
  GramProjections proj = project_gram(theta.kernel, x, st.s, /*need_w=*/false);
  Mat a = proj.stks + st.s.st_diag_s(shift);
  Eigen::LLT<Mat> llt(a);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error(std::string("fit: ill-conditioned actions, S'KtildeS not PD ") +
                             "(diag ratio ~" +
                             std::to_string(a.diagonal().maxCoeff() /
                                            std::max(a.diagonal().minCoeff(), 1e-300)) +
                             ")");
  st.chol_proj = std::move(llt);
  st.v_tilde = st.s.s_times(st.chol_proj.solve(st.s.st_times(residual)));
  return st;
}

/// Predictive mean and combined variance at one point. The variance uses the
/// single expression k(x,x) - k_x' C k_x through the stored factor.
inline PredictiveDist predict(const PosteriorState& st, const Eigen::Ref<const Vec>& x) {
  PredictiveDist out;
  out.mean = mean_eval(st.mean, x);
  out.var_total = st.theta.kernel.outputscale;  // k(x, x) for stationary kernels
  if (st.prior_only) return out;
  Vec kx(st.n());
  for (Eigen::Index j = 0; j < st.n(); ++j)
    kx[j] = kernel_eval(st.theta.kernel, Vec(st.x_train.row(j)), x);
  out.mean += kx.dot(st.v_tilde);
  if (st.projected) {
    out.var_total -= inv_quad(st.chol_proj, st.s.st_times(kx));
  } else {
    out.var_total -= inv_quad(st.chol_full, kx);
  }
  out.var_total = std::max(out.var_total, 0.0);
  return out;
}

/// Joint predictive moments over a batch of points (q x d). Used by the
/// Monte-Carlo utility; cost O(n q (i + q)).
inline std::pair<Vec, Mat> predict_joint(const PosteriorState& st,
                                         const Eigen::Ref<const Mat>& xq) {
  const Eigen::Index q = xq.rows();
  Vec mu = mean_eval_rows(st.mean, xq);
  Mat cov(q, q);
  if (st.prior_only) {
    cov = gram(st.theta.kernel, xq, xq);
    return {mu, cov};
  }
  const Mat kxq = gram(st.theta.kernel, st.x_train, xq);  // n x q
  mu += kxq.transpose() * st.v_tilde;
  cov = gram(st.theta.kernel, xq, xq);
  if (st.projected) {
    Mat sk(st.s.cols(), q);
    for (Eigen::Index c = 0; c < q; ++c) sk.col(c) = st.s.st_times(kxq.col(c));
    const Mat half = st.chol_proj.matrixL().solve(sk);
    cov -= half.transpose() * half;
  } else {
    const Mat half = st.chol_full.matrixL().solve(kxq);
    cov -= half.transpose() * half;
  }
  return {mu, cov};
}

/// Split the combined variance into mathematical and computational parts.
/// Dense O(n^3) path, intended for diagnostics.
inline std::pair<double, double> variance_decomposition(const PosteriorState& st,
                                                        const Eigen::Ref<const Vec>& x) {
  if (st.prior_only) {
    if (st.n() == 0) return {st.theta.kernel.outputscale, 0.0};
    // i == 0: all uncertainty beyond the full solve is computational.
  }
  Mat ktilde = gram(st.theta.kernel, st.x_train, st.x_train);
  ktilde.diagonal() += st.ktilde_diag_shift();
  const Eigen::LLT<Mat> llt = chol_spd(ktilde, "variance_decomposition: Ktilde");
  Vec kx(st.n());
  for (Eigen::Index j = 0; j < st.n(); ++j)
    kx[j] = kernel_eval(st.theta.kernel, Vec(st.x_train.row(j)), x);
  const double math_part = inv_quad(llt, kx);
  const double var_math = std::max(st.theta.kernel.outputscale - math_part, 0.0);
  double comp_part = 0.0;
  if (!st.prior_only) {
    comp_part = st.projected ? inv_quad(st.chol_proj, st.s.st_times(kx)) : math_part;
  }
  const double var_comp = math_part - comp_part;
  return {var_math, var_comp};
}

/// Full predictive distribution with the decomposition attached.
inline PredictiveDist predict_decomposed(const PosteriorState& st,
                                         const Eigen::Ref<const Vec>& x) {
  PredictiveDist out = predict(st, x);
  auto [vm, vc] = variance_decomposition(st, x);
  out.var_math = vm;
  out.var_comp = vc;
  return out;
}

}  // namespace rcagp
