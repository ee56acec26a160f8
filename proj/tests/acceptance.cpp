// Acceptance suite: one checkable criterion per function, each printing a
// single [PASS]/[FAIL] line. Run with no arguments for the full battery or
// with a number (1-11) for a single criterion.

#include <sys/resource.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>
#include <thread>

#include "rcagp/bayesopt.hpp"
#include "rcagp/diagnostics.hpp"
#include "rcagp/harness.hpp"

using namespace rcagp;

namespace {

struct Instance {
  Mat x;
  Vec y;
  Hyperparams theta;
};

Instance random_instance(std::uint64_t seed, int n, int d = 1, bool outliers = false) {
  RngStream rng(stream_seed(seed, 777));
  Instance inst;
  inst.x.resize(n, d);
  inst.y.resize(n);
  for (int j = 0; j < n; ++j) {
    for (int c = 0; c < d; ++c) inst.x(j, c) = rng.uniform(-2.0, 2.0);
    inst.y[j] = std::sin(1.5 * inst.x.row(j).sum()) + 0.15 * rng.normal();
  }
  if (outliers) {
    const int m = std::max(1, n / 10);
    for (int j = 0; j < m; ++j) inst.y[static_cast<Eigen::Index>(rng.uniform_int(0, n - 1))] -=
        rng.uniform(2.0, 6.0);
  }
  inst.theta.kernel = (seed % 2 == 0) ? KernelSpec::matern52(0.8, 1.0)
                                      : KernelSpec::rbf(0.8, 1.0);
  inst.theta.sigma2 = 0.03 + 0.1 * rng.uniform(0.0, 1.0);
  inst.theta.robust.epsilon = 0.2;
  return inst;
}

double now_ms() {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

/// Well-separated 1D inducing locations; a shuffled linspace keeps every
/// prefix spread out so nested action sets stay well conditioned.
Mat spread_inducing(Eigen::Index count, std::uint64_t seed) {
  Mat z(count, 1);
  for (Eigen::Index j = 0; j < count; ++j)
    z(j, 0) = count == 1 ? 0.0 : -2.0 + 4.0 * static_cast<double>(j) / (count - 1);
  std::mt19937_64 eng(seed);
  std::vector<Eigen::Index> order(count);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), eng);
  Mat out(count, 1);
  for (Eigen::Index j = 0; j < count; ++j) out.row(j) = z.row(order[j]);
  return out;
}

bool report(int num, const std::string& name, bool pass, const std::string& detail) {
  std::cout << (pass ? "[PASS] " : "[FAIL] ") << "criterion " << num << ": " << name;
  if (!detail.empty()) std::cout << " -- " << detail;
  std::cout << std::endl;
  return pass;
}

// criterion 1: constant-weight reductions, 50 random instances, < 10 s
bool c1() {
  const double t0 = now_ms();
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    RngStream rng(stream_seed(seed, 5));
    const int n = 5 + static_cast<int>(rng.uniform_int(0, 95));
    Instance inst = random_instance(seed, n, 1, true);
    inst.theta.robust = RobustConfig::constant_weight();  // beta = sigma/sqrt(2), c = inf
    const MeanSpec mean = MeanSpec::constant(0.1);
    // rotate through the action families, keeping each numerically full rank
    ActionMatrix act = ActionMatrix::sparse_block(n, std::max<Eigen::Index>(1, n / 5));
    if (seed % 3 == 1)
      act = ActionMatrix::inducing(spread_inducing(std::min(n, 8), seed), n);
    if (seed % 3 == 2) {
      Mat s(n, std::max<Eigen::Index>(1, n / 5));
      for (Eigen::Index r = 0; r < s.rows(); ++r)
        for (Eigen::Index col = 0; col < s.cols(); ++col) s(r, col) = rng.normal();
      act = ActionMatrix::from_dense(s);
    }

    const auto rcagp = fit(ModelKind::RCaGP, inst.x, inst.y, inst.theta, mean, act);
    const auto camodel = fit(ModelKind::CaGP, inst.x, inst.y, inst.theta, mean, act);
    const auto rcgp = fit(ModelKind::RCGP, inst.x, inst.y, inst.theta, mean, act);
    const auto exact = fit(ModelKind::ExactGP, inst.x, inst.y, inst.theta, mean, act);
    for (int t = 0; t < 20; ++t) {
      const Vec xs = Vec::Constant(1, rng.uniform(-2.5, 2.5));
      const auto a = predict(rcagp, xs), b = predict(camodel, xs);
      const auto c = predict(rcgp, xs), d = predict(exact, xs);
      worst = std::max({worst, std::abs(a.mean - b.mean), std::abs(a.var_total - b.var_total),
                        std::abs(c.mean - d.mean), std::abs(c.var_total - d.var_total)});
    }
  }
  const double secs = (now_ms() - t0) / 1000.0;
  return report(1, "constant-weight reductions (RCaGP=CaGP, RCGP=ExactGP)",
                worst < 1e-8 && secs < 10.0,
                "max |diff| = " + std::to_string(worst) + ", " + std::to_string(secs) + " s");
}

// criterion 2: full actions recover the dense robust model, < 10 s
bool c2() {
  const double t0 = now_ms();
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    RngStream rng(stream_seed(seed, 6));
    const int n = 5 + static_cast<int>(rng.uniform_int(0, 55));
    Instance inst = random_instance(seed, n, 1, true);
    const MeanSpec mean = MeanSpec::constant(0.0);
    const auto proj =
        fit(ModelKind::RCaGP, inst.x, inst.y, inst.theta, mean, ActionMatrix::identity(n));
    const auto dense =
        fit(ModelKind::RCGP, inst.x, inst.y, inst.theta, mean, ActionMatrix::identity(n));
    for (int t = 0; t < 40; ++t) {
      const Vec xs = Vec::Constant(1, rng.uniform(-2.5, 2.5));
      const auto a = predict(proj, xs), b = predict(dense, xs);
      worst = std::max({worst, std::abs(a.mean - b.mean), std::abs(a.var_total - b.var_total)});
    }
  }
  const double secs = (now_ms() - t0) / 1000.0;
  return report(2, "full-action recovery of the dense robust posterior",
                worst < 1e-6 && secs < 10.0,
                "max |diff| = " + std::to_string(worst) + ", " + std::to_string(secs) + " s");
}

// criterion 3: combined variance never undercuts the dense robust variance
bool c3() {
  double worst_slack = 0.0;
  int points = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    RngStream rng(stream_seed(seed, 8));
    const int n = 10 + static_cast<int>(rng.uniform_int(0, 40));
    Instance inst = random_instance(seed, n, 1, true);
    const MeanSpec mean = MeanSpec::constant(0.0);
    const Eigen::Index i = 1 + static_cast<Eigen::Index>(rng.uniform_int(0, 7));
    const ActionMatrix act = seed % 2 == 0
                                 ? ActionMatrix::inducing(spread_inducing(i, seed), n)
                                 : ActionMatrix::sparse_block(n, 1 + n / 4);
    const auto proj = fit(ModelKind::RCaGP, inst.x, inst.y, inst.theta, mean, act);
    const auto dense =
        fit(ModelKind::RCGP, inst.x, inst.y, inst.theta, mean, ActionMatrix::identity(n));
    for (int t = 0; t < 50; ++t, ++points) {
      const Vec xs = Vec::Constant(1, rng.uniform(-3.0, 3.0));
      worst_slack = std::max(
          worst_slack, predict(dense, xs).var_total - predict(proj, xs).var_total);
    }
  }
  return report(3, "conservative uncertainty (var_RCaGP >= var_RCGP)",
                worst_slack <= 1e-10,
                std::to_string(points) + " points, worst undercut = " +
                    std::to_string(worst_slack));
}

// criterion 4: worst-case-error identities, 100 instances, both kernels, < 30 s
bool c4() {
  const double t0 = now_ms();
  double worst1 = 0.0, worst2 = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    RngStream rng(stream_seed(seed, 9));
    const int n = 8 + static_cast<int>(rng.uniform_int(0, 22));
    Instance inst = random_instance(seed, n, 1, seed % 3 == 0);
    const MeanSpec mean = MeanSpec::constant(0.0);
    ActionMatrix act = ActionMatrix::sparse_block(n, 1 + n / 4);
    if (seed % 3 == 1) act = ActionMatrix::inducing(spread_inducing(1 + n / 4, seed), n);
    if (seed % 3 == 2) {
      Mat s(n, 1 + n / 4);
      for (Eigen::Index r = 0; r < s.rows(); ++r)
        for (Eigen::Index c = 0; c < s.cols(); ++c) s(r, c) = rng.normal();
      act = ActionMatrix::from_dense(s);
    }
    const auto st = fit(ModelKind::RCaGP, inst.x, inst.y, inst.theta, mean, act);
    const Vec probe = Vec::Constant(1, rng.uniform(2.5, 3.5));
    const auto id = worst_case_identity(st, probe);
    worst1 = std::max(worst1, std::abs(id.lhs1 - id.rhs1) / (1.0 + std::abs(id.rhs1)));
    worst2 = std::max(worst2, std::abs(id.lhs2 - id.rhs2) / (1.0 + std::abs(id.rhs2)));
  }
  const double secs = (now_ms() - t0) / 1000.0;
  return report(4, "worst-case-error identities",
                worst1 < 1e-6 && worst2 < 1e-6 && secs < 30.0,
                "max rel err = " + std::to_string(std::max(worst1, worst2)) + ", " +
                    std::to_string(secs) + " s");
}

// criterion 5: robustness dichotomy of the influence curves
bool c5() {
  int robust_ok = 0, plain_ok = 0, exact_ok = 0;
  Vec grid(13);
  for (int j = 0; j < 13; ++j) grid[j] = std::pow(10.0, 1.0 + 5.0 * j / 12.0);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Instance inst = random_instance(seed, 14, 1, false);
    const MeanSpec mean = MeanSpec::constant(0.0);
    const auto act = ActionMatrix::sparse_block(14, 4);
    const auto r = pif_curve(ModelKind::RCaGP, inst.x, inst.y, 4, grid, inst.theta, mean, act);
    const auto c = pif_curve(ModelKind::CaGP, inst.x, inst.y, 4, grid, inst.theta, mean, act);
    const auto e = pif_curve(ModelKind::ExactGP, inst.x, inst.y, 4, grid, inst.theta, mean, act);
    robust_ok += (r.tail_slope < 0.1 && r.bounded) ? 1 : 0;
    plain_ok += (c.tail_slope > 1.9 && c.tail_slope < 2.1) ? 1 : 0;
    exact_ok += (e.tail_slope > 1.9 && e.tail_slope < 2.1) ? 1 : 0;
  }

  // closed form of the plain-model influence, exact through the
  // finite-dimensional marginal when the actions span R^n
  double worst_closed = 0.0, worst_ratio = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Instance inst = random_instance(seed + 50, 12, 1, false);
    const MeanSpec mean = MeanSpec::constant(0.0);
    const double delta = 4.0 + static_cast<double>(seed);
    const double got = pif(ModelKind::CaGP, inst.x, inst.y, 3, inst.y[3] + delta, inst.theta,
                           mean, ActionMatrix::identity(12));
    const Mat k = gram(inst.theta.kernel, inst.x, inst.x);
    const double sigma_eff = inst.theta.sigma2 + gram_jitter(inst.theta.kernel);
    Mat khat = k;
    khat.diagonal().array() += sigma_eff;
    const Mat ck = khat.llt().solve(k);
    const double expected = 0.5 * ck(3, 3) / sigma_eff * delta * delta;
    worst_closed = std::max(worst_closed, std::abs(got - expected) / expected);

    // low-rank actions: the influence stays exactly quadratic
    const auto act = ActionMatrix::sparse_block(12, 3);
    const double p1 =
        pif(ModelKind::CaGP, inst.x, inst.y, 3, inst.y[3] + delta, inst.theta, mean, act);
    const double p2 =
        pif(ModelKind::CaGP, inst.x, inst.y, 3, inst.y[3] + 2.0 * delta, inst.theta, mean, act);
    worst_ratio = std::max(worst_ratio, std::abs(p2 / p1 - 4.0));
  }
  const bool pass = robust_ok == 10 && plain_ok == 10 && exact_ok == 10 &&
                    worst_closed < 1e-6 && worst_ratio < 1e-6;
  return report(5, "influence-curve dichotomy and plain closed form", pass,
                "bounded " + std::to_string(robust_ok) + "/10, quadratic " +
                    std::to_string(plain_ok) + "+" + std::to_string(exact_ok) +
                    "/20, closed-form rel err " + std::to_string(worst_closed) +
                    ", ratio err " + std::to_string(worst_ratio));
}

// criterion 6: mean-convergence bound along nested action sequences
bool c6() {
  int violations = 0;
  double worst_rho = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    RngStream rng(stream_seed(seed, 12));
    const int n = 12 + static_cast<int>(rng.uniform_int(0, 12));
    Instance inst = random_instance(seed, n, 1, seed % 2 == 0);
    std::vector<ActionMatrix> seq;
    if (seed % 2 == 0) {
      // nested prefixes of a sparse-block pattern
      const Mat full = ActionView::materialize(ActionMatrix::sparse_block(n, n / 2), inst.x,
                                               inst.theta.kernel)
                           .to_dense();
      for (Eigen::Index i = 1; i <= n / 2; i += 2)
        seq.push_back(ActionMatrix::from_dense(full.leftCols(i)));
    } else {
      // nested inducing sets: prefixes of one shuffled spread, counts kept
      // small enough that the smooth-kernel projection stays full rank
      const Mat z_full = spread_inducing(8, seed);
      for (Eigen::Index i : {1, 2, 4, 6, 8})
        seq.push_back(ActionMatrix::inducing(z_full.topRows(i), n));
    }
    const auto rows = mean_convergence_check(inst.x, inst.y, inst.theta, seq);
    for (const auto& row : rows) {
      if (row.lhs > row.bound + 1e-8) ++violations;
      worst_rho = std::max(worst_rho, row.rho);
    }
  }
  return report(6, "mean-convergence bound", violations == 0 && worst_rho <= 1.0 + 1e-10,
                std::to_string(violations) + " violations, max rho = " +
                    std::to_string(worst_rho));
}

// criterion 7: scalar ELBO against the hand expansion; Richardson gradients
bool c7() {
  const double kappa = 2.0, sigma2 = 0.5, beta = 0.9, c = 1.3, s1 = 0.8;
  const double y = 1.7, m = 0.2;
  Hyperparams th;
  th.kernel = KernelSpec::rbf(1.0, kappa);
  th.sigma2 = sigma2;
  th.robust.beta = beta;
  th.robust.c_override = c;
  Mat x(1, 1);
  x << 0.4;
  const double delta = y - m;
  const double w = beta / std::sqrt(1.0 + delta * delta / (c * c));
  const double jw = sigma2 / (2.0 * w * w);
  const double mw = m - 2.0 * sigma2 * delta / (c * c + delta * delta);
  const double r = y - mw;
  const double ktilde = kappa + sigma2 * jw + 1e-8 * kappa;
  const double mu_hat = m + kappa * r / ktilde;
  const double khat = kappa - kappa * kappa / ktilde;
  const double inv_sjw = 1.0 / (sigma2 * jw);
  const double cterm = r * r * inv_sjw + std::log(2.0 * M_PI * sigma2 * jw);
  const double expected_loss = -0.5 * khat * inv_sjw - 0.5 * mu_hat * mu_hat * inv_sjw +
                               mu_hat * r * inv_sjw - 0.5 * cterm;
  const double kl = 0.5 * (kappa * r * r / (ktilde * ktilde) + std::log(s1 * s1 * ktilde) -
                           std::log(sigma2) - std::log(s1 * s1 * jw) - kappa / ktilde);
  const auto got = elbo(th, ActionMatrix::from_dense(Mat::Constant(1, 1, s1)), x,
                        Vec::Constant(1, y), MeanSpec::constant(m));
  const double scalar_err = std::max(std::abs(got.expected_loss - expected_loss),
                                     std::abs(got.kl - kl));

  double worst_rich = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Instance inst = random_instance(seed, 14, 1, false);
    const auto actions = ActionMatrix::sparse_block(14, 2);
    const MeanSpec mean = MeanSpec::constant(0.0);
    const Vec g1 = elbo_grad(inst.theta, actions, inst.x, inst.y, mean, 1e-4);
    const Vec g2 = elbo_grad(inst.theta, actions, inst.x, inst.y, mean, 5e-5);
    for (Eigen::Index j = 0; j < g1.size(); ++j)
      worst_rich =
          std::max(worst_rich, std::abs(g1[j] - g2[j]) / std::max(std::abs(g2[j]), 1e-6));
  }
  return report(7, "ELBO scalar oracle and gradient consistency",
                scalar_err < 1e-10 && worst_rich < 0.05,
                "scalar err = " + std::to_string(scalar_err) +
                    ", Richardson worst = " + std::to_string(worst_rich));
}

// criterion 8: directional regression comparison on gist1d and a CSV dataset
bool c8() {
  const double t0 = now_ms();
  auto wins_on = [&](const std::string& name, const Dataset& data) {
    SuiteConfig cfg;
    cfg.datasets.emplace_back(name, data);
    cfg.models = {ModelKind::RCaGP, ModelKind::CaGP};
    cfg.protocols = {ContaminationSpec::Protocol::Asymmetric};
    cfg.fraction = 0.1;
    for (std::uint64_t s = 0; s < 10; ++s) cfg.seeds.push_back(s);
    cfg.opts.actions = 25;
    cfg.opts.iters = 50;
    cfg.opts.lr = 0.01;
    cfg.opts.epsilon = 0.2;
    cfg.threads = 2;
    const auto results = run_regression_suite(cfg);
    int mae_wins = 0, nll_wins = 0;
    for (std::uint64_t s = 0; s < 10; ++s) {
      double mae_r = 0, mae_c = 0, nll_r = 0, nll_c = 0;
      for (const auto& r : results) {
        if (r.seed != s) continue;
        if (r.model == "rcagp") {
          mae_r = r.mae;
          nll_r = r.nll;
        } else {
          mae_c = r.mae;
          nll_c = r.nll;
        }
      }
      mae_wins += mae_r < mae_c ? 1 : 0;
      nll_wins += nll_r < nll_c ? 1 : 0;
    }
    return std::make_pair(mae_wins, nll_wins);
  };

  const auto [g_mae, g_nll] = wins_on("gist1d", gist1d_dataset(200, 0.1, 1));

  // a user-provided UCI CSV is used when pointed to; otherwise a bundled
  // nonlinear multivariate table goes through the same CSV ingestion path
  Dataset csv_data;
  std::string csv_name = "friedman-csv";
  if (const char* env = std::getenv("RCAGP_UCI_CSV")) {
    const char* target = std::getenv("RCAGP_UCI_TARGET");
    csv_data = load_csv(env, target ? target : "y");
    csv_name = "uci-csv";
  } else {
    write_csv(friedman_dataset(400, 1.0, 2), "acceptance_friedman.csv");
    csv_data = load_csv("acceptance_friedman.csv", "y");
  }
  const auto [c_mae, c_nll] = wins_on(csv_name, csv_data);
  const double secs = (now_ms() - t0) / 1000.0;
  const bool pass =
      g_mae >= 8 && g_nll >= 8 && c_mae >= 8 && c_nll >= 8 && secs < 300.0;
  return report(8, "regression direction vs the plain model", pass,
                "gist1d wins " + std::to_string(g_mae) + "/" + std::to_string(g_nll) + ", " +
                    csv_name + " wins " + std::to_string(c_mae) + "/" + std::to_string(c_nll) +
                    " (mae/nll, of 10), " + std::to_string(secs) + " s");
}

// criterion 9: contaminated Hartmann6 optimization, robust vs plain surrogate
bool c9() {
  const double t0 = now_ms();
  auto objective = [](const Vec& x) { return -test_function(TestFunction::Hartmann6, x); };
  const Mat bounds = test_function_domain(TestFunction::Hartmann6);

  struct Job {
    ModelKind model;
    std::uint64_t seed;
    double best = 0.0;
  };
  std::vector<Job> jobs;
  for (std::uint64_t s = 0; s < 5; ++s) {
    jobs.push_back({ModelKind::RCaGP, s});
    jobs.push_back({ModelKind::CaGP, s});
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t j = next.fetch_add(1);
      if (j >= jobs.size()) return;
      BoConfig cfg;
      cfg.model = jobs[j].model;
      cfg.n_init = 50;
      cfg.budget = 60;
      cfg.q = 1;
      cfg.actions = 25;
      cfg.p_outlier = 0.25;
      cfg.seed = jobs[j].seed;
      const BoHistory hist = bo_loop(objective, bounds, cfg);
      jobs[j].best = hist.best_true.back();
    }
  };
  std::thread t(worker);
  worker();
  t.join();

  std::vector<double> robust, plain;
  for (const auto& j : jobs)
    (j.model == ModelKind::RCaGP ? robust : plain).push_back(j.best);
  std::sort(robust.begin(), robust.end());
  std::sort(plain.begin(), plain.end());
  const double med_r = robust[2], med_p = plain[2];
  const double secs = (now_ms() - t0) / 1000.0;
  return report(9, "contaminated Hartmann6 optimization direction",
                med_r >= med_p && secs < 900.0,
                "median best: robust " + std::to_string(med_r) + " vs plain " +
                    std::to_string(med_p) + ", " + std::to_string(secs) + " s");
}

// criterion 10: the expert-guided mean does not hurt under perfect corrections
bool c10() {
  const Dataset data = gist1d_dataset(200, 0.1, 3);
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    ContaminationSpec spec;
    spec.protocol = ContaminationSpec::Protocol::Asymmetric;
    spec.fraction = 0.1;
    RegressionOptions expert_opts;
    expert_opts.actions = 25;
    expert_opts.iters = 30;
    expert_opts.expert = RegressionOptions::Expert::Perfect;
    RegressionOptions plain_opts = expert_opts;
    plain_opts.expert = RegressionOptions::Expert::None;
    const auto with_expert =
        run_regression_cell("gist1d", data, ModelKind::RCaGP, spec, expert_opts, seed);
    const auto without =
        run_regression_cell("gist1d", data, ModelKind::RCaGP, spec, plain_opts, seed);
    if (!with_expert.failed && !without.failed && with_expert.mae <= without.mae) ++wins;
  }
  return report(10, "expert-guided mean ablation", wins >= 7,
                std::to_string(wins) + "/10 seeds with expert MAE <= constant MAE");
}

long peak_rss_kib() {
  struct rusage usage {};
  if (getrusage(RUSAGE_SELF, &usage) == 0 && usage.ru_maxrss > 0) return usage.ru_maxrss;
  std::ifstream in("/proc/self/status");
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("VmHWM:", 0) == 0) return std::strtol(line.c_str() + 6, nullptr, 10);
  }
  return -1;
}

// criterion 11: complexity contract of the projected fit
bool c11() {
  RngStream rng(stream_seed(4, 2024));
  auto make_data = [&](Eigen::Index n) {
    Mat x(n, 2);
    Vec y(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      x(j, 0) = rng.uniform(-2.0, 2.0);
      x(j, 1) = rng.uniform(-2.0, 2.0);
      y[j] = std::sin(x(j, 0)) + 0.3 * x(j, 1) + 0.1 * rng.normal();
    }
    return std::make_pair(x, y);
  };
  Hyperparams theta;
  theta.kernel = KernelSpec::matern52(0.8, 1.0);
  theta.sigma2 = 0.05;
  const MeanSpec mean = MeanSpec::constant(0.0);

  std::vector<double> log_n, log_t;
  std::string timings;
  for (Eigen::Index n : {500, 1000, 2000}) {
    auto [x, y] = make_data(n);
    const auto actions = ActionMatrix::sparse_block(n, 50);
    double best = std::numeric_limits<double>::infinity();
    for (int rep = 0; rep < 3; ++rep) {
      const double t0 = now_ms();
      const auto st = fit(ModelKind::RCaGP, x, y, theta, mean, actions);
      best = std::min(best, now_ms() - t0);
      if (st.v_tilde.size() != n) return report(11, "complexity contract", false, "bad fit");
    }
    log_n.push_back(std::log(static_cast<double>(n)));
    log_t.push_back(std::log(best));
    timings += std::to_string(n) + ":" + std::to_string(best) + "ms ";
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t j = 0; j < log_n.size(); ++j) {
    sx += log_n[j];
    sy += log_t[j];
    sxx += log_n[j] * log_n[j];
    sxy += log_n[j] * log_t[j];
  }
  const double slope = (3 * sxy - sx * sy) / (3 * sxx - sx * sx);
  const bool exponent_ok = slope >= 0.9 && slope <= 1.3;

  // memory audit: a large projected fit must stay far below any n x n
  // allocation (n^2 doubles at n = 20000 would be 3.2 GiB)
  bool memory_ok = false;
  long hwm_kib = -1;
  {
    auto [x, y] = make_data(20000);
    const auto actions = ActionMatrix::sparse_block(20000, 50);
    const auto st = fit(ModelKind::RCaGP, x, y, theta, mean, actions);
    hwm_kib = peak_rss_kib();
    memory_ok = st.v_tilde.size() == 20000 && hwm_kib > 0 && hwm_kib < 1024 * 1024;
  }
  return report(11, "complexity contract (fit scaling and memory)",
                exponent_ok && memory_ok,
                "exponent = " + std::to_string(slope) + " in [0.9,1.3]: " +
                    (exponent_ok ? "yes" : "no") + " (" + timings + "); peak RSS = " +
                    std::to_string(hwm_kib / 1024) + " MiB < 1024: " +
                    (memory_ok ? "yes" : "no"));
}

}  // namespace

int main(int argc, char** argv) {
  using CriterionFn = bool (*)();
  const CriterionFn criteria[] = {c1, c2, c3, c4, c5, c6, c7, c8, c9, c10, c11};
  int failures = 0;
  if (argc > 1) {
    const int num = std::atoi(argv[1]);
    if (num < 1 || num > 11) {
      std::cerr << "usage: acceptance [1-11]\n";
      return 2;
    }
    failures += criteria[num - 1]() ? 0 : 1;
  } else {
    for (auto fn : criteria) failures += fn() ? 0 : 1;
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " failed")
              << std::endl;
  }
  return failures;
}
