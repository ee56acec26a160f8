#pragma once

#include <Eigen/Eigenvalues>

#include "rcagp/model_selection.hpp"
#include "rcagp/posterior.hpp"

namespace rcagp {

/// KL(N(mu0, cov0) || N(mu1, cov1)) for multivariate Gaussians, Cholesky
/// throughout. cov1 must be positive definite; cov0 gets one jittered retry.
inline double gaussian_kl(const Eigen::Ref<const Vec>& mu0, const Eigen::Ref<const Mat>& cov0,
                          const Eigen::Ref<const Vec>& mu1, const Eigen::Ref<const Mat>& cov1) {
  const Eigen::Index n = mu0.size();
  if (mu1.size() != n || cov0.rows() != n || cov1.rows() != n)
    throw std::invalid_argument("gaussian_kl: dimension mismatch");
  const Eigen::LLT<Mat> l1 = chol_spd(cov1, "gaussian_kl: cov1");
  Eigen::LLT<Mat> l0(cov0);
  if (l0.info() != Eigen::Success) {
    Mat c0 = cov0;
    c0.diagonal().array() += 1e-12 * (1.0 + cov0.diagonal().maxCoeff());
    l0.compute(c0);
    if (l0.info() != Eigen::Success)
      throw std::runtime_error("gaussian_kl: cov0 not positive semidefinite");
  }
  const double trace = l1.solve(cov0).trace();
  const Vec d = mu1 - mu0;
  return 0.5 * (trace - static_cast<double>(n) + d.dot(l1.solve(d)) + logdet_from_llt(l1) -
                logdet_from_llt(l0));
}

namespace detail {

/// Dense posterior moments of f at the training inputs (diagnostics grade).
inline std::pair<Vec, Mat> train_moments(const PosteriorState& st) {
  const Mat k = gram(st.theta.kernel, st.x_train, st.x_train);
  Vec mu = mean_eval_rows(st.mean, st.x_train);
  Mat cov = k;
  if (st.prior_only) return {mu, cov};
  mu += k * st.v_tilde;
  if (st.projected) {
    const Mat w = k * st.s.to_dense();
    const Mat half = st.chol_proj.matrixL().solve(w.transpose());
    cov -= half.transpose() * half;
  } else {
    const Mat half = st.chol_full.matrixL().solve(k);
    cov -= half.transpose() * half;
  }
  cov = 0.5 * (cov + cov.transpose()).eval();
  cov.diagonal().array() += 1e-10 * st.theta.kernel.outputscale;
  return {mu, cov};
}

}  // namespace detail

/// Posterior influence of replacing y_m with y_c: KL between the clean
/// posterior over f(X) and the contaminated one fit with the same theta and
/// the soft threshold frozen from the clean fit.
inline double pif(ModelKind model, const Eigen::Ref<const Mat>& x, const Eigen::Ref<const Vec>& y,
                  Eigen::Index m_index, double y_c, const Hyperparams& theta,
                  const MeanSpec& mean, const ActionMatrix& actions) {
  if (m_index < 0 || m_index >= y.size()) throw std::invalid_argument("pif: bad index");
  const PosteriorState clean = fit(model, x, y, theta, mean, actions);
  Hyperparams frozen = theta;
  frozen.robust.c_override = clean.weighted.c;
  Vec yc = y;
  yc[m_index] = y_c;
  const PosteriorState dirty = fit(model, x, yc, frozen, mean, actions);
  const auto [mu0, cov0] = detail::train_moments(clean);
  const auto [mu1, cov1] = detail::train_moments(dirty);
  return gaussian_kl(mu0, cov0, mu1, cov1);
}

struct PifCurve {
  Vec grid;        // contaminated values y_c
  Vec values;      // PIF at each grid point
  double tail_slope = 0.0;
  bool bounded = false;
};

/// PIF sweep plus a log-log slope fit over the last decade of the grid.
/// A flat tail (slope < 0.1) marks a robust posterior; the plain models
/// grow quadratically.
inline PifCurve pif_curve(ModelKind model, const Eigen::Ref<const Mat>& x,
                          const Eigen::Ref<const Vec>& y, Eigen::Index m_index,
                          const Eigen::Ref<const Vec>& grid, const Hyperparams& theta,
                          const MeanSpec& mean, const ActionMatrix& actions) {
  for (Eigen::Index j = 1; j < grid.size(); ++j)
    if (!(grid[j] > grid[j - 1]))
      throw std::invalid_argument("pif_curve: grid must be strictly increasing");
  PifCurve out;
  out.grid = grid;
  out.values.resize(grid.size());
  for (Eigen::Index j = 0; j < grid.size(); ++j)
    out.values[j] = pif(model, x, y, m_index, grid[j], theta, mean, actions);

  const double cutoff = grid[grid.size() - 1] / 10.0;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int count = 0;
  for (Eigen::Index j = 0; j < grid.size(); ++j) {
    if (std::abs(grid[j]) < cutoff || out.values[j] <= 0.0) continue;
    const double lx = std::log(std::abs(grid[j]));
    const double ly = std::log(out.values[j]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++count;
  }
  out.tail_slope = count >= 2 ? (count * sxy - sx * sy) / (count * sxx - sx * sx) : 0.0;
  out.bounded = out.tail_slope < 0.1;
  return out;
}

struct WorstCaseIdentity {
  double lhs1 = 0.0, rhs1 = 0.0;  // combined uncertainty + noise
  double lhs2 = 0.0, rhs2 = 0.0;  // computational uncertainty
};

/// Both sides of the worst-case-error equalities. The left sides are RKHS
/// norms assembled explicitly from the Gram matrix of the noise-augmented
/// kernel on {x} union X; the right sides come from the posterior API.
inline WorstCaseIdentity worst_case_identity(const PosteriorState& st,
                                             const Eigen::Ref<const Vec>& x) {
  if (st.mean.kind != MeanKind::Constant || st.mean.value != 0.0)
    throw std::invalid_argument("worst_case_identity: zero prior mean required");
  const Eigen::Index n = st.n();
  Vec kx(n);
  for (Eigen::Index j = 0; j < n; ++j)
    kx[j] = kernel_eval(st.theta.kernel, Vec(st.x_train.row(j)), x);

  Mat ktilde = gram(st.theta.kernel, st.x_train, st.x_train);
  ktilde.diagonal() += st.ktilde_diag_shift();
  const Eigen::LLT<Mat> llt_full = chol_spd(ktilde, "worst_case_identity: Ktilde");

  Vec d = Vec::Zero(n);  // C k_x
  if (!st.prior_only) {
    if (st.projected)
      d = st.s.s_times(st.chol_proj.solve(st.s.st_times(kx)));
    else
      d = llt_full.solve(kx);
  }

  const double sigma2 = st.theta.sigma2;
  const double kxx = st.theta.kernel.outputscale;

  // || k^w(.,x) - sum_j d_j k^w(., x_j) ||^2 via the explicit (n+1) Gram
  Mat gw(n + 1, n + 1);
  gw(0, 0) = kxx + sigma2;
  gw.block(0, 1, 1, n) = kx.transpose();
  gw.block(1, 0, n, 1) = kx;
  gw.block(1, 1, n, n) = ktilde;
  Vec coeff(n + 1);
  coeff[0] = 1.0;
  coeff.tail(n) = -d;
  WorstCaseIdentity out;
  out.lhs1 = coeff.dot(gw * coeff);
  out.rhs1 = predict(st, x).var_total + sigma2;

  const Vec dp = llt_full.solve(kx) - d;  // (Ktilde^-1 - C) k_x
  out.lhs2 = dp.dot(ktilde * dp);
  out.rhs2 = inv_quad(llt_full, kx) - kx.dot(d);
  return out;
}

struct MeanConvergenceRow {
  Eigen::Index actions = 0;
  double lhs = 0.0;    // RKHS distance between the full and projected means
  double bound = 0.0;  // rho(i) c(J_w) ||mu* - m||
  double rho = 0.0;    // relative error bound, always <= 1
};

/// Convergence of the projected posterior mean toward the full robust
/// solution along a nested action sequence, with the certified upper bound.
inline std::vector<MeanConvergenceRow> mean_convergence_check(
    const Eigen::Ref<const Mat>& x, const Eigen::Ref<const Vec>& y, const Hyperparams& theta,
    const std::vector<ActionMatrix>& action_seq) {
  const MeanSpec mean = MeanSpec::constant(0.0);
  const Mat k = gram(theta.kernel, x, x);
  const PosteriorState full = fit(ModelKind::RCGP, x, y, theta, mean, ActionMatrix::identity(1));
  const Vec v_hat = full.v_tilde;
  const Vec residual = y - full.weighted.m_w;
  const double vkr = v_hat.dot(residual);        // v' Ktilde v
  const double norm_k = v_hat.dot(k * v_hat);    // ||mu* - m||^2 in H_k

  Eigen::SelfAdjointEigenSolver<Mat> es(k);
  const double lambda_min_k = std::max(es.eigenvalues().minCoeff(), 1e-12);
  const double lambda_max_jw = theta.sigma2 * full.weighted.jw_diag.maxCoeff();
  const double c_jw = std::sqrt(1.0 + lambda_max_jw / lambda_min_k);

  std::vector<MeanConvergenceRow> rows;
  for (const auto& actions : action_seq) {
    const PosteriorState st = fit(ModelKind::RCaGP, x, y, theta, mean, actions);
    MeanConvergenceRow row;
    row.actions = actions.i;
    const Vec diff = v_hat - st.v_tilde;
    row.lhs = std::sqrt(std::max(diff.dot(k * diff), 0.0));
    const double r_c_r = st.prior_only ? 0.0 : residual.dot(st.v_tilde);  // r' C r
    row.rho = std::sqrt(std::max(vkr - r_c_r, 0.0) / vkr);
    row.bound = row.rho * c_jw * std::sqrt(std::max(norm_k, 0.0));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace rcagp
