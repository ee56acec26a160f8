#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rcagp/posterior.hpp"

namespace rcagp {

/// ELBO split into its two blocks; total = expected_loss - kl.
struct ElboBreakdown {
  double expected_loss = 0.0;
  double kl = 0.0;
  double total = 0.0;
};

namespace detail {

inline void check_finite(double v, const char* term) {
  if (!std::isfinite(v))
    throw std::runtime_error(std::string("elbo: non-finite term ") + term);
}

}  // namespace detail

/// ELBO core given the Gram projections G = S'KS and W = KS. The KL block
/// follows the closed form obtained through the Weinstein-Aronszajn step,
/// det(sigma^2 S'J_w S), evaluated exactly; the fully expanded variant
/// log det(S'S) + log det(J_w) is only equal when J_w is a multiple of the
/// identity (or i = n), and taking it literally can push the KL negative.
inline ElboBreakdown elbo_given_projections(const Hyperparams& theta, const ActionView& s,
                                            const Mat& g, const Mat& w,
                                            const Eigen::Ref<const Vec>& y,
                                            const Eigen::Ref<const Vec>& m) {
  const Eigen::Index n = y.size();
  const Eigen::Index i = s.cols();
  const double sigma2 = theta.sigma2;
  const WeightedNoise wn = build_weighted_noise(y, m, sigma2, theta.robust);

  const Vec shift = sigma2 * wn.jw_diag.array() + gram_jitter(theta.kernel);
  const Mat a = g + s.st_diag_s(shift);
  const Eigen::LLT<Mat> llt_a = chol_spd(a, "elbo: S'KtildeS");

  const Vec residual = y - wn.m_w;
  const Vec sr = s.st_times(residual);
  const Vec v_bar = llt_a.solve(sr);
  const Vec mu_hat = m + w * v_bar;

  // diag of K C K via the half-solve L^-1 W'
  const Mat half = llt_a.matrixL().solve(w.transpose());
  const Vec khat_diag =
      (Vec::Constant(n, theta.kernel.outputscale) - half.colwise().squaredNorm().transpose())
          .cwiseMax(0.0);

  const Vec inv_sjw = 1.0 / (sigma2 * wn.jw_diag.array());  // sigma^-2 J_w^-1 diagonal
  const double trace_term = 0.5 * (khat_diag.array() * inv_sjw.array()).sum();
  detail::check_finite(trace_term, "trace(J^-1/2 khat J^-1/2)");
  const double mean_term = 0.5 * (mu_hat.array().square() * inv_sjw.array()).sum();
  detail::check_finite(mean_term, "mu' J^-1 mu");
  const Vec nu = residual.array() * inv_sjw.array();
  const double nu_term = mu_hat.dot(nu);
  detail::check_finite(nu_term, "mu' nu");

  // Data constant completing the quadratic loss into the normalized
  // heteroscedastic Gaussian log N(y - m_w; f, sigma^2 J_w), i.e.
  // C = (y-m_w)' (sigma^2 J_w)^-1 (y-m_w) + sum_j log(2 pi sigma^2 jw_j).
  // Under constant weights the expected loss then collapses exactly to the
  // Gaussian expected log-likelihood, so noise learning stays proper; with
  // the normalizer dropped the objective is monotone in sigma^2.
  double c_term = (residual.array().square() * inv_sjw.array()).sum();
  c_term += (2.0 * M_PI * sigma2 * wn.jw_diag.array()).log().sum();
  detail::check_finite(c_term, "C(x, y, sigma2)");

  ElboBreakdown out;
  out.expected_loss = -trace_term - mean_term + nu_term - 0.5 * c_term;

  const double quad = v_bar.dot(g * v_bar);
  detail::check_finite(quad, "v' S'KS v");
  const double logdet_a = logdet_from_llt(llt_a);
  const Mat sjs = s.st_diag_s(wn.jw_diag);
  const double logdet_sjs = logdet_from_llt(chol_spd(sjs, "elbo: S'J_wS"));
  const double trace_kl = llt_a.solve(g).trace();
  out.kl = 0.5 * (quad + logdet_a - static_cast<double>(i) * std::log(sigma2) - logdet_sjs -
                  trace_kl);
  detail::check_finite(out.kl, "KL");
  out.total = out.expected_loss - out.kl;
  detail::check_finite(out.total, "total");
  return out;
}

/// Evidence lower bound of the robust computation-aware model. Weights are
/// rebuilt from the current (m, c, sigma2) on every call so hyperparameter
/// moves are reflected in the robustness terms.
inline ElboBreakdown elbo(const Hyperparams& theta, const ActionMatrix& actions,
                          const Eigen::Ref<const Mat>& x, const Eigen::Ref<const Vec>& y,
                          const MeanSpec& mean) {
  theta.validate();
  if (actions.i < 1) throw std::invalid_argument("elbo: need at least one action");
  const ActionView s = ActionView::materialize(actions, x, theta.kernel);
  const GramProjections proj = project_gram(theta.kernel, x, s, /*need_w=*/true);
  const Vec m = mean_eval_rows(mean, x);
  return elbo_given_projections(theta, s, proj.stks, proj.w, y, m);
}

/// Central finite differences over the unconstrained hyperparameters,
/// step 1e-4 (1 + |param|) per coordinate.
inline Vec elbo_grad(const Hyperparams& theta, const ActionMatrix& actions,
                     const Eigen::Ref<const Mat>& x, const Eigen::Ref<const Vec>& y,
                     const MeanSpec& mean, double step_scale = 1e-4) {
  const Vec u0 = theta.to_unconstrained();
  Vec grad(u0.size());
  for (Eigen::Index j = 0; j < u0.size(); ++j) {
    const double h = step_scale * (1.0 + std::abs(u0[j]));
    Vec up = u0, dn = u0;
    up[j] += h;
    dn[j] -= h;
    const double fu = elbo(theta.with_unconstrained(up), actions, x, y, mean).total;
    const double fd = elbo(theta.with_unconstrained(dn), actions, x, y, mean).total;
    grad[j] = (fu - fd) / (2.0 * h);
  }
  return grad;
}

struct OptConfig {
  double lr = 0.01;
  int max_iters = 50;
  std::uint64_t seed = 0;
  bool optimize_actions = false;  // sparse-block / dense values ride along
  double action_lr = 0.01;
};

struct OptResult {
  Hyperparams theta;
  ActionMatrix actions;
  std::vector<double> trace;  // best ELBO seen after each iteration
};

/// First-order adaptive-moment ascent state (bias-corrected).
class Adam {
 public:
  explicit Adam(Eigen::Index dim) : m_(Vec::Zero(dim)), v_(Vec::Zero(dim)) {}

  Vec step(const Eigen::Ref<const Vec>& grad, const Eigen::Ref<const Vec>& lr) {
    ++t_;
    m_ = 0.9 * m_ + 0.1 * grad;
    v_ = 0.999 * v_.array() + 0.001 * grad.array().square();
    const double bc1 = 1.0 - std::pow(0.9, t_);
    const double bc2 = 1.0 - std::pow(0.999, t_);
    return (lr.array() * (m_.array() / bc1) / ((v_.array() / bc2).sqrt() + 1e-8)).matrix();
  }

 private:
  Vec m_, v_;
  long t_ = 0;
};

/// Maximize the ELBO over hyperparameters (and trainable action values when
/// requested). Finite-difference gradients; returns the best iterate seen.
inline OptResult optimize_hyperparams(const Eigen::Ref<const Mat>& x,
                                      const Eigen::Ref<const Vec>& y, const MeanSpec& mean,
                                      const Hyperparams& theta0, const ActionMatrix& actions0,
                                      const OptConfig& opt) {
  if (opt.max_iters < 1) throw std::invalid_argument("optimize_hyperparams: max_iters >= 1");
  const bool move_actions = opt.optimize_actions && actions0.kind == ActionKind::SparseBlock;
  const Eigen::Index p = theta0.unconstrained_dim();
  const Eigen::Index q = move_actions ? actions0.values.size() : 0;

  Vec params(p + q);
  params.head(p) = theta0.to_unconstrained();
  if (q > 0) params.tail(q) = actions0.values;
  Vec lr(p + q);
  lr.head(p).setConstant(opt.lr);
  if (q > 0) lr.tail(q).setConstant(opt.action_lr);

  auto assemble = [&](const Vec& u) {
    Hyperparams th = theta0.with_unconstrained(u.head(p));
    ActionMatrix act = actions0;
    if (q > 0) act.values = u.tail(q);
    return std::make_pair(th, act);
  };
  auto value_at = [&](const Vec& u) -> double {
    auto [th, act] = assemble(u);
    try {
      return elbo(th, act, x, y, mean).total;
    } catch (const std::exception&) {
      return -std::numeric_limits<double>::infinity();
    }
  };

  Adam adam(p + q);
  OptResult best;
  double best_val = value_at(params);
  if (std::isfinite(best_val)) std::tie(best.theta, best.actions) = assemble(params);
  double cur;
  for (int it = 0; it < opt.max_iters; ++it) {
    Vec grad = Vec::Zero(p + q);
    for (Eigen::Index j = 0; j < p + q; ++j) {
      const double h = 1e-4 * (1.0 + std::abs(params[j]));
      Vec up = params, dn = params;
      up[j] += h;
      dn[j] -= h;
      const double fu = value_at(up), fd = value_at(dn);
      grad[j] = (std::isfinite(fu) && std::isfinite(fd)) ? (fu - fd) / (2.0 * h) : 0.0;
    }
    params += adam.step(grad, lr);
    cur = value_at(params);
    if (std::isfinite(cur) && (!std::isfinite(best_val) || cur > best_val)) {
      best_val = cur;
      std::tie(best.theta, best.actions) = assemble(params);
    }
    best.trace.push_back(best_val);
  }
  if (!std::isfinite(best_val))
    throw std::runtime_error("optimize_hyperparams: ELBO never finite during the run");
  return best;
}

}  // namespace rcagp
