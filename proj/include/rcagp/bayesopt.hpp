#pragma once

#include <chrono>
#include <functional>

#include "rcagp/diagnostics.hpp"
#include "rcagp/expert_prior.hpp"
#include "rcagp/model_selection.hpp"

namespace rcagp {

// ---------------------------------------------------------------------------
// synthetic test functions (minimization closed forms; BO tasks negate them)

enum class TestFunction { Hartmann6, Branin2, Gist1D };

inline Eigen::Index test_function_dim(TestFunction f) {
  switch (f) {
    case TestFunction::Hartmann6: return 6;
    case TestFunction::Branin2: return 2;
    case TestFunction::Gist1D: return 1;
  }
  return 0;
}

/// Box domain, one row per dimension: [lo, hi].
inline Mat test_function_domain(TestFunction f) {
  switch (f) {
    case TestFunction::Hartmann6: {
      Mat b(6, 2);
      b.col(0).setZero();
      b.col(1).setOnes();
      return b;
    }
    case TestFunction::Branin2: {
      Mat b(2, 2);
      b << -5.0, 10.0, 0.0, 15.0;
      return b;
    }
    case TestFunction::Gist1D: {
      Mat b(1, 2);
      b << -3.0, 3.0;
      return b;
    }
  }
  return Mat();
}

inline double test_function(TestFunction f, const Eigen::Ref<const Vec>& x) {
  const Mat dom = test_function_domain(f);
  if (x.size() != dom.rows()) throw std::invalid_argument("test_function: wrong dimension");
  for (Eigen::Index j = 0; j < x.size(); ++j)
    if (x[j] < dom(j, 0) - 1e-12 || x[j] > dom(j, 1) + 1e-12)
      throw std::invalid_argument("test_function: point outside the declared domain");
  switch (f) {
    case TestFunction::Hartmann6: {
      static const double alpha[4] = {1.0, 1.2, 3.0, 3.2};
      static const double a[4][6] = {{10, 3, 17, 3.5, 1.7, 8},
                                     {0.05, 10, 17, 0.1, 8, 14},
                                     {3, 3.5, 1.7, 10, 17, 8},
                                     {17, 8, 0.05, 10, 0.1, 14}};
      static const double p[4][6] = {{0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886},
                                     {0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991},
                                     {0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650},
                                     {0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381}};
      double acc = 0.0;
      for (int i = 0; i < 4; ++i) {
        double inner = 0.0;
        for (int j = 0; j < 6; ++j) inner += a[i][j] * (x[j] - p[i][j]) * (x[j] - p[i][j]);
        acc += alpha[i] * std::exp(-inner);
      }
      return -acc;
    }
    case TestFunction::Branin2: {
      const double b = 5.1 / (4.0 * M_PI * M_PI), c = 5.0 / M_PI, t = 1.0 / (8.0 * M_PI);
      const double u = x[1] - b * x[0] * x[0] + c * x[0] - 6.0;
      return u * u + 10.0 * (1.0 - t) * std::cos(x[0]) + 10.0;
    }
    case TestFunction::Gist1D:
      return std::sin(3.0 * x[0]) + 0.3 * x[0] * x[0];
  }
  throw std::logic_error("unknown test function");
}

// ---------------------------------------------------------------------------
// acquisition utility

/// softplus(f - y*), overflow-safe and strictly positive.
inline double softplus_utility(double f_val, double y_star) {
  const double x = f_val - y_star;
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

/// Monte-Carlo expected log utility over a batch: log of the sample average
/// of the per-sample max softplus improvement, with joint posterior samples
/// at Xq plus unit observation noise. Base draws are fixed by the seed and
/// the batch is canonicalized by sorting, so the value is deterministic and
/// permutation invariant.
inline double expected_log_utility(const PosteriorState& posterior,
                                   const Eigen::Ref<const Mat>& xq_in, double y_star,
                                   int s_count, std::uint64_t seed) {
  if (s_count < 1) throw std::invalid_argument("expected_log_utility: s_count >= 1");
  const Eigen::Index q = xq_in.rows();
  Mat xq = xq_in;
  std::vector<Eigen::Index> order(q);
  for (Eigen::Index j = 0; j < q; ++j) order[j] = j;
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index c = 0; c < xq_in.cols(); ++c) {
      if (xq_in(a, c) != xq_in(b, c)) return xq_in(a, c) < xq_in(b, c);
    }
    return false;
  });
  for (Eigen::Index j = 0; j < q; ++j) xq.row(j) = xq_in.row(order[j]);

  auto [mu, cov] = predict_joint(posterior, xq);
  cov.diagonal().array() += 1e-10 * (1.0 + posterior.theta.kernel.outputscale);
  Eigen::LLT<Mat> llt(cov);
  if (llt.info() != Eigen::Success) {
    cov.diagonal().array() += 1e-6 * (1.0 + posterior.theta.kernel.outputscale);
    llt.compute(cov);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("expected_log_utility: predictive covariance not PD");
  }
  const Mat l = llt.matrixL();

  RngStream rng(seed);
  double acc = 0.0;
  Vec z(q);
  for (int s = 0; s < s_count; ++s) {
    for (Eigen::Index j = 0; j < q; ++j) z[j] = rng.normal();
    const Vec f = mu + l * z;
    double best = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < q; ++j)
      best = std::max(best, softplus_utility(f[j] + rng.normal(), y_star));
    acc += best;
  }
  return std::log(acc / s_count);
}

/// EULBO: evidence lower bound plus the expected log acquisition utility.
/// Non-robust surrogates evaluate the bound under constant weights.
inline double eulbo(ModelKind model, const Hyperparams& theta, const ActionMatrix& actions,
                    const Eigen::Ref<const Mat>& xq, const Eigen::Ref<const Mat>& x,
                    const Eigen::Ref<const Vec>& y, const MeanSpec& mean, double y_star,
                    int s_count, std::uint64_t seed) {
  Hyperparams used_theta = theta;
  if (!model_is_robust(model)) used_theta.robust = RobustConfig::constant_weight();
  const ActionMatrix used = model_is_projected(model) ? actions : ActionMatrix::identity(x.rows());
  const double bound = elbo(used_theta, used, x, y, mean).total;
  const PosteriorState st = fit(model, x, y, theta, mean, actions);
  return bound + expected_log_utility(st, xq, y_star, s_count, seed);
}

// ---------------------------------------------------------------------------
// joint (x, S, theta) proposal

struct BoConfig {
  ModelKind model = ModelKind::RCaGP;
  int q = 1;
  int mc_samples = 32;
  int budget = 60;
  int n_init = 50;
  Eigen::Index actions = 25;
  double p_outlier = 0.0;
  enum class Expert { None, Perfect, Noisy } expert = Expert::None;
  double sigma2_corr = 1.0;
  int expert_every = 20;
  int inner_steps = 30;
  int multistarts = 4;  // random x inits, plus one best-observed perturbation
  // Query step size in logit space: large enough that 30 steps polish a
  // start without collapsing onto the incumbent. The paper-defaults preset
  // pins 0.001/0.01 instead.
  double lr_x = 0.01;
  double lr_model = 0.01;
  bool freeze_model = false;  // ascend x only (diagnostics)
  RobustConfig robust;
  std::uint64_t seed = 0;
};

struct Proposal {
  Mat xq;  // q x d, in the unit box
  Hyperparams theta;
  ActionMatrix actions;
  double value = -std::numeric_limits<double>::infinity();
};

namespace detail {

inline double logit(double p) {
  const double q = std::min(std::max(p, 1e-9), 1.0 - 1e-9);
  return std::log(q / (1.0 - q));
}
inline double sigmoid(double u) { return 1.0 / (1.0 + std::exp(-u)); }

/// One EULBO evaluation pipeline with the Gram matrix cached across probes
/// that do not move theta.
class EulboEval {
 public:
  EulboEval(ModelKind model, const Eigen::Ref<const Mat>& x, const Eigen::Ref<const Vec>& y,
            const MeanSpec& mean, const Hyperparams& base, const ActionMatrix& actions,
            double y_star, int s_count, std::uint64_t seed)
      : model_(model), x_(x), y_(y), mean_(mean), base_(base), actions_(actions),
        y_star_(y_star), s_count_(s_count), seed_(seed) {
    if (!model_is_robust(model_)) base_.robust = RobustConfig::constant_weight();
    m_ = mean_eval_rows(mean_, x_);
    projected_ = model_is_projected(model_);
  }

  Eigen::Index theta_dim() const { return base_.unconstrained_dim(); }
  Eigen::Index sval_dim() const {
    return projected_ && actions_.kind == ActionKind::SparseBlock ? actions_.values.size() : 0;
  }

  /// Full objective. Rebuilds the Gram cache only when theta moved.
  double operator()(const Vec& u_theta, const Vec& svals, const Mat& xq) {
    try {
      refresh_model(u_theta, svals);
      return elbo_total_ + utility(xq);
    } catch (const std::exception&) {
      return -std::numeric_limits<double>::infinity();
    }
  }

  /// Utility-only re-evaluation against the cached model pieces.
  double with_xq(const Mat& xq) {
    try {
      return elbo_total_ + utility(xq);
    } catch (const std::exception&) {
      return -std::numeric_limits<double>::infinity();
    }
  }

 private:
  void refresh_model(const Vec& u_theta, const Vec& svals) {
    const bool theta_moved = !have_k_ || (u_theta - u_cache_).cwiseAbs().maxCoeff() > 0.0;
    const bool svals_moved =
        sval_dim() > 0 && (!have_model_ || (svals - svals_cache_).cwiseAbs().maxCoeff() > 0.0);
    if (have_model_ && !theta_moved && !svals_moved) return;
    theta_ = base_.with_unconstrained(u_theta);
    if (theta_moved) {
      k_ = gram(theta_.kernel, x_, x_);
      u_cache_ = u_theta;
      have_k_ = true;
      have_model_ = false;
    }
    ActionMatrix act = actions_;
    if (sval_dim() > 0) act.values = svals;
    const ActionMatrix used = projected_ ? act : ActionMatrix::identity(x_.rows());
    s_ = ActionView::materialize(used, x_, theta_.kernel);
    const Mat w = s_.rows_times(k_);
    const Mat g = s_.rows_transpose_times(0, w);
    const ElboBreakdown eb = elbo_given_projections(theta_, s_, g, w, y_, m_);
    elbo_total_ = eb.total;
    wn_ = build_weighted_noise(y_, m_, theta_.sigma2, theta_.robust);
    const Vec shift = theta_.sigma2 * wn_.jw_diag.array() + gram_jitter(theta_.kernel);
    a_llt_.compute(g + s_.st_diag_s(shift));
    if (a_llt_.info() != Eigen::Success) throw std::runtime_error("eulbo: projection not PD");
    v_tilde_ = s_.s_times(a_llt_.solve(s_.st_times(y_ - wn_.m_w)));
    svals_cache_ = svals;
    have_model_ = true;
  }

  double utility(const Mat& xq_in) {
    // canonical order for permutation invariance of the sample max
    const Eigen::Index q = xq_in.rows();
    Mat xq = xq_in;
    std::vector<Eigen::Index> order(q);
    for (Eigen::Index j = 0; j < q; ++j) order[j] = j;
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
      for (Eigen::Index c = 0; c < xq_in.cols(); ++c)
        if (xq_in(a, c) != xq_in(b, c)) return xq_in(a, c) < xq_in(b, c);
      return false;
    });
    for (Eigen::Index j = 0; j < q; ++j) xq.row(j) = xq_in.row(order[j]);

    const Mat kxq = gram(theta_.kernel, x_, xq);
    Vec mu = mean_eval_rows(mean_, xq) + kxq.transpose() * v_tilde_;
    Mat cov = gram(theta_.kernel, xq, xq);
    Mat sk(s_.cols(), q);
    for (Eigen::Index c = 0; c < q; ++c) sk.col(c) = s_.st_times(kxq.col(c));
    const Mat half = a_llt_.matrixL().solve(sk);
    cov -= half.transpose() * half;
    cov.diagonal().array() += 1e-10 * (1.0 + theta_.kernel.outputscale);
    Eigen::LLT<Mat> llt(cov);
    if (llt.info() != Eigen::Success) {
      cov.diagonal().array() += 1e-6 * (1.0 + theta_.kernel.outputscale);
      llt.compute(cov);
      if (llt.info() != Eigen::Success) throw std::runtime_error("eulbo: covariance not PD");
    }
    const Mat l = llt.matrixL();
    RngStream rng(seed_);
    double acc = 0.0;
    Vec z(q);
    for (int s = 0; s < s_count_; ++s) {
      for (Eigen::Index j = 0; j < q; ++j) z[j] = rng.normal();
      const Vec f = mu + l * z;
      double best = -std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < q; ++j)
        best = std::max(best, softplus_utility(f[j] + rng.normal(), y_star_));
      acc += best;
    }
    return std::log(acc / s_count_);
  }

  ModelKind model_;
  Mat x_;
  Vec y_, m_;
  MeanSpec mean_;
  Hyperparams base_, theta_;
  ActionMatrix actions_;
  double y_star_;
  int s_count_;
  std::uint64_t seed_;
  bool projected_ = true;

  bool have_k_ = false, have_model_ = false;
  Vec u_cache_, svals_cache_;
  Mat k_;
  ActionView s_;
  Eigen::LLT<Mat> a_llt_;
  Vec v_tilde_;
  WeightedNoise wn_;
  double elbo_total_ = 0.0;
};

}  // namespace detail

/// Joint acquisition: first-order ascent on (Xq through a sigmoid box map,
/// sparse-block action values, theta), multi-started over random batch
/// initializations plus a perturbation of the incumbent. Returns the best
/// EULBO iterate; proposed points cannot leave the unit box by construction.
inline Proposal propose_batch(const Eigen::Ref<const Mat>& x, const Eigen::Ref<const Vec>& y,
                              const MeanSpec& mean, const BoConfig& cfg,
                              const Hyperparams& warm_theta, const ActionMatrix& warm_actions,
                              double y_star, RngStream& rng, std::uint64_t mc_seed) {
  const Eigen::Index d = x.cols();
  const Eigen::Index q = cfg.q;
  Hyperparams base = warm_theta;
  base.robust = cfg.robust;
  detail::EulboEval eval(cfg.model, x, y, mean, base, warm_actions, y_star, cfg.mc_samples,
                         mc_seed);
  const Eigen::Index p = eval.theta_dim();
  const Eigen::Index ns = cfg.freeze_model ? 0 : eval.sval_dim();
  const Eigen::Index np = cfg.freeze_model ? 0 : p;

  // candidate batch initializations
  std::vector<Mat> starts;
  for (int s = 0; s < cfg.multistarts; ++s) {
    Mat xq(q, d);
    for (Eigen::Index r = 0; r < q; ++r)
      for (Eigen::Index c = 0; c < d; ++c) xq(r, c) = rng.uniform(0.0, 1.0);
    starts.push_back(xq);
  }
  {
    Eigen::Index best_idx = 0;
    y.maxCoeff(&best_idx);
    Mat xq(q, d);
    for (Eigen::Index r = 0; r < q; ++r)
      for (Eigen::Index c = 0; c < d; ++c)
        xq(r, c) = std::min(1.0 - 1e-6, std::max(1e-6, x(best_idx, c) + 0.05 * rng.normal()));
    starts.push_back(xq);
  }

  const Vec u_theta0 = base.to_unconstrained();
  const Vec svals0 = eval.sval_dim() > 0 ? warm_actions.values : Vec();
  eval(u_theta0, svals0, starts[0]);  // prime the cache
  Eigen::Index best_start = 0;
  double best_init = -std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < starts.size(); ++s) {
    const double v = eval.with_xq(starts[s]);
    if (v > best_init) {
      best_init = v;
      best_start = static_cast<Eigen::Index>(s);
    }
  }

  // parameter vector: [xq logits | theta | action values]
  Vec params(q * d + np + ns);
  {
    const Mat& xq = starts[best_start];
    for (Eigen::Index r = 0; r < q; ++r)
      for (Eigen::Index c = 0; c < d; ++c) params[r * d + c] = detail::logit(xq(r, c));
  }
  if (np > 0) params.segment(q * d, p) = u_theta0;
  if (ns > 0) params.tail(ns) = svals0;
  Vec lr(params.size());
  lr.head(q * d).setConstant(cfg.lr_x);
  if (np + ns > 0) lr.tail(np + ns).setConstant(cfg.lr_model);

  auto unpack_xq = [&](const Vec& u) {
    Mat xq(q, d);
    for (Eigen::Index r = 0; r < q; ++r)
      for (Eigen::Index c = 0; c < d; ++c) xq(r, c) = detail::sigmoid(u[r * d + c]);
    return xq;
  };
  auto value_at = [&](const Vec& u) {
    const Vec ut = np > 0 ? Vec(u.segment(q * d, p)) : u_theta0;
    const Vec sv = ns > 0 ? Vec(u.tail(ns)) : svals0;
    return eval(ut, sv, unpack_xq(u));
  };

  Proposal best;
  best.value = best_init;
  best.xq = starts[best_start];
  best.theta = base;
  best.actions = warm_actions;

  Adam adam(params.size());
  for (int it = 0; it < cfg.inner_steps; ++it) {
    Vec grad = Vec::Zero(params.size());
    for (Eigen::Index j = 0; j < params.size(); ++j) {
      const double h = 1e-4 * (1.0 + std::abs(params[j]));
      Vec up = params, dn = params;
      up[j] += h;
      dn[j] -= h;
      double fu, fd;
      if (j < q * d) {
        // model pieces unchanged: utility-only probes
        fu = eval.with_xq(unpack_xq(up));
        fd = eval.with_xq(unpack_xq(dn));
      } else {
        fu = value_at(up);
        fd = value_at(dn);
        value_at(params);  // restore the cache for subsequent x probes
      }
      grad[j] = (std::isfinite(fu) && std::isfinite(fd)) ? (fu - fd) / (2.0 * h) : 0.0;
    }
    params += adam.step(grad, lr);
    const double v = value_at(params);
    if (std::isfinite(v) && v > best.value) {
      best.value = v;
      best.xq = unpack_xq(params);
      if (np > 0) best.theta = base.with_unconstrained(params.segment(q * d, p));
      if (ns > 0) {
        best.actions = warm_actions;
        best.actions.values = params.tail(ns);
      }
    }
  }
  if (!std::isfinite(best.value)) {
    // every start failed: random batch with the warm model
    Mat xq(q, d);
    for (Eigen::Index r = 0; r < q; ++r)
      for (Eigen::Index c = 0; c < d; ++c) xq(r, c) = rng.uniform(0.0, 1.0);
    best.xq = xq;
  }
  return best;
}

// ---------------------------------------------------------------------------
// optimization loop

struct BoHistory {
  Mat x_init;                    // unit-box coordinates
  Vec y_init_true;
  std::vector<Mat> proposals;    // per iteration, q x d unit-box
  std::vector<Vec> y_true;       // per iteration
  std::vector<Vec> y_observed;   // per iteration, possibly contaminated
  std::vector<double> best_true; // running best over true values
  std::vector<double> wall_ms;
  std::vector<Eigen::Index> outlier_data_indices;  // into the stacked data set
};

/// EULBO-driven loop, maximization. Observations may pass through the
/// additive contamination channel; the incumbent y* uses observed values
/// while best-so-far reporting uses the uncontaminated ones. Three RNG
/// streams (initial design, proposals/MC, contamination) keep paired runs
/// aligned until the first contaminated observation.
inline BoHistory bo_loop(const std::function<double(const Vec&)>& objective,
                         const Eigen::Ref<const Mat>& bounds, const BoConfig& cfg) {
  if (cfg.q < 1 || cfg.n_init < 1 || cfg.budget < 0)
    throw std::invalid_argument("bo_loop: bad configuration");
  const Eigen::Index d = bounds.rows();
  RngStream rng_init(stream_seed(cfg.seed, 0));
  RngStream rng_prop(stream_seed(cfg.seed, 1));
  RngStream rng_contam(stream_seed(cfg.seed, 2));

  auto to_box = [&](const Vec& u) {
    Vec x(d);
    for (Eigen::Index j = 0; j < d; ++j)
      x[j] = bounds(j, 0) + (bounds(j, 1) - bounds(j, 0)) * u[j];
    return x;
  };

  BoHistory hist;
  hist.x_init.resize(cfg.n_init, d);
  hist.y_init_true.resize(cfg.n_init);
  std::vector<double> y_obs, y_tru;
  std::vector<Eigen::Index> init_ok;
  for (int j = 0; j < cfg.n_init; ++j) {
    for (Eigen::Index c = 0; c < d; ++c) hist.x_init(j, c) = rng_init.uniform(0.0, 1.0);
    double v;
    try {
      v = objective(to_box(Vec(hist.x_init.row(j))));
    } catch (const std::exception&) {
      v = std::numeric_limits<double>::quiet_NaN();
    }
    hist.y_init_true[j] = v;
    if (std::isfinite(v)) {
      init_ok.push_back(j);
      y_obs.push_back(v);
      y_tru.push_back(v);
    }
  }
  if (init_ok.size() < 2)
    throw std::runtime_error("bo_loop: initial design produced fewer than two usable points");
  Mat x_data(static_cast<Eigen::Index>(init_ok.size()), d);
  for (std::size_t j = 0; j < init_ok.size(); ++j) x_data.row(j) = hist.x_init.row(init_ok[j]);
  Eigen::Map<const Vec> init_y(y_tru.data(), static_cast<Eigen::Index>(y_tru.size()));
  const double sigma_bar = std::max(
      std::sqrt((init_y.array() - init_y.mean()).square().sum() /
                std::max<Eigen::Index>(init_y.size() - 1, 1)),
      1e-12);

  Hyperparams theta;
  theta.kernel = KernelSpec::matern52(0.3, 1.0);
  theta.sigma2 = 0.02;
  theta.robust = cfg.robust;
  Vec warm_svals;

  ExpertFeedback expert_snapshot;  // raw-space corrections captured at checkpoints
  bool expert_active = false;

  double best = *std::max_element(y_tru.begin(), y_tru.end());
  int evals = 0;
  int iter = 0;
  while (evals < cfg.budget) {
    ++iter;
    const auto t0 = std::chrono::steady_clock::now();
    const Eigen::Index n = x_data.rows();
    Eigen::Map<const Vec> yo(y_obs.data(), n);

    const double mu_y = yo.mean();
    const double sd_y = std::max(std::sqrt((yo.array() - mu_y).square().sum() /
                                           std::max<Eigen::Index>(n - 1, 1)),
                                 1e-12);
    const Vec y_std = (yo.array() - mu_y) / sd_y;

    // expert checkpoint: capture all injected outliers so far
    if (cfg.expert != BoConfig::Expert::None && !hist.outlier_data_indices.empty() &&
        iter % cfg.expert_every == 0) {
      Eigen::Map<const Vec> yt(y_tru.data(), n);
      expert_snapshot = simulate_expert(hist.outlier_data_indices, yt, cfg.sigma2_corr,
                                        cfg.expert == BoConfig::Expert::Noisy, &rng_prop);
      expert_active = true;
    }
    MeanSpec mean = MeanSpec::constant(0.0);
    std::shared_ptr<ExpertPriorTable> table;
    if (expert_active) {
      ExpertFeedback fb = expert_snapshot;
      fb.corrections = ((fb.corrections.array() - mu_y) / sd_y).matrix();
      const KernelSpec l = KernelSpec::rbf(median_heuristic_lengthscale(x_data), 1.0);
      table = std::make_shared<ExpertPriorTable>(build_expert_prior(x_data, y_std, fb, l));
      mean = make_expert_mean(table);
    }

    ActionMatrix actions = ActionMatrix::sparse_block(n, std::min<Eigen::Index>(cfg.actions, n));
    if (warm_svals.size() > 0) {
      actions.values.head(std::min(warm_svals.size(), actions.values.size())) =
          warm_svals.head(std::min(warm_svals.size(), actions.values.size()));
    }

    const double y_star = y_std.maxCoeff();
    const Proposal prop =
        propose_batch(x_data, y_std, mean, cfg, theta, actions, y_star, rng_prop,
                      stream_seed(cfg.seed, 100 + static_cast<std::uint64_t>(iter)));
    theta = prop.theta;
    if (prop.actions.kind == ActionKind::SparseBlock) warm_svals = prop.actions.values;

    const int take = std::min<int>(cfg.q, cfg.budget - evals);
    Mat xq = prop.xq.topRows(take);
    Vec yt(take), yb(take);
    std::vector<bool> dirty(take, false);
    for (int r = 0; r < take; ++r) {
      double v;
      try {
        v = objective(to_box(Vec(xq.row(r))));
      } catch (const std::exception&) {
        v = std::numeric_limits<double>::quiet_NaN();
      }
      yt[r] = v;
      // both draws are consumed unconditionally so paired runs that differ
      // only in p stay stream-aligned
      const bool contaminate = rng_contam.uniform(0.0, 1.0) < cfg.p_outlier;
      const double bump = rng_contam.uniform(sigma_bar, 2.0 * sigma_bar);
      yb[r] = v;
      if (std::isfinite(v)) {
        if (contaminate) {
          yb[r] = v + bump;
          dirty[r] = true;
        }
        best = std::max(best, v);
      }
    }
    // failed evaluations stay on record but are not added to the training set
    Eigen::Index keep = 0;
    for (int r = 0; r < take; ++r)
      if (std::isfinite(yt[r])) ++keep;
    Mat x_new(x_data.rows() + keep, d);
    x_new.topRows(x_data.rows()) = x_data;
    Eigen::Index at = x_data.rows();
    for (int r = 0; r < take; ++r) {
      if (!std::isfinite(yt[r])) continue;
      if (dirty[r]) hist.outlier_data_indices.push_back(at);
      x_new.row(at++) = xq.row(r);
      y_obs.push_back(yb[r]);
      y_tru.push_back(yt[r]);
    }
    x_data = std::move(x_new);
    evals += take;

    hist.proposals.push_back(xq);
    hist.y_true.push_back(yt);
    hist.y_observed.push_back(yb);
    hist.best_true.push_back(best);
    hist.wall_ms.push_back(
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
            .count());
  }
  return hist;
}

}  // namespace rcagp
