// Command-line harness: regression experiments, EULBO Bayesian optimization,
// robustness curves, numerical identity checks, and the epsilon sweep.

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>

#include "rcagp/diagnostics.hpp"
#include "rcagp/harness.hpp"
#include "rcagp/state_io.hpp"

using namespace rcagp;
using nlohmann::json;

namespace {

ModelKind parse_model(const std::string& name) {
  if (name == "gp") return ModelKind::ExactGP;
  if (name == "rcgp") return ModelKind::RCGP;
  if (name == "cagp") return ModelKind::CaGP;
  if (name == "rcagp") return ModelKind::RCaGP;
  throw CLI::ValidationError("--model", "expected one of gp|rcgp|cagp|rcagp");
}

ContaminationSpec::Protocol parse_protocol(const std::string& name) {
  if (name == "none") return ContaminationSpec::Protocol::None;
  if (name == "asymmetric") return ContaminationSpec::Protocol::Asymmetric;
  if (name == "uniform") return ContaminationSpec::Protocol::Uniform;
  if (name == "focused") return ContaminationSpec::Protocol::Focused;
  if (name == "bochannel") return ContaminationSpec::Protocol::BoChannel;
  throw CLI::ValidationError("--protocol", "unknown contamination protocol");
}

/// Merge a flat JSON config under the CLI values: CLI > config > defaults.
/// Runs after parsing, so config values are pushed through each untouched
/// option's callback by hand.
void apply_config_file(CLI::App& app, const std::string& path) {
  if (path.empty()) return;
  std::ifstream in(path);
  if (!in) throw CLI::ValidationError("--config", "cannot open " + path);
  json cfg = json::parse(in);
  CLI::App* sub = nullptr;
  for (auto* s : app.get_subcommands()) sub = s;
  for (auto& [key, value] : cfg.items()) {
    CLI::Option* opt = sub ? sub->get_option_no_throw("--" + key) : nullptr;
    if (!opt) opt = app.get_option_no_throw("--" + key);
    if (!opt) {
      std::cerr << "config: ignoring unknown key '" << key << "'\n";
      continue;
    }
    if (opt->count() > 0) continue;  // CLI wins
    if (value.is_array()) {
      for (auto& v : value) opt->add_result(v.is_string() ? v.get<std::string>() : v.dump());
    } else if (value.is_boolean()) {
      if (value.get<bool>()) opt->add_result("true");
    } else {
      opt->add_result(value.is_string() ? value.get<std::string>() : value.dump());
    }
    opt->run_callback();
  }
}

Dataset resolve_dataset(const std::string& name, const std::string& path,
                        const std::string& target, Eigen::Index synth_n, std::uint64_t seed) {
  if (name == "gist1d" && path.empty()) return gist1d_dataset(synth_n, 0.1, seed);
  if (name == "friedman" && path.empty()) return friedman_dataset(synth_n, 1.0, seed);
  if (path.empty())
    throw CLI::ValidationError("--data", "dataset '" + name + "' needs --data <csv path>");
  return load_csv(path, target);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

int cmd_regress(const std::string& dataset_name, const std::string& data_path,
                const std::string& target, Eigen::Index synth_n,
                const std::vector<std::string>& models, const std::string& protocol,
                double p_outlier, int n_seeds, std::uint64_t seed0, RegressionOptions opts,
                bool paper_defaults, int threads, const std::string& out_prefix,
                const std::string& export_state, bool gnuplot) {
  if (paper_defaults) {
    opts.beta = 1.0;
    opts.epsilon = 0.2;
    opts.iters = 50;
    opts.lr = 0.01;
    opts.test_fraction = 0.2;
  }
  SuiteConfig cfg;
  cfg.datasets.emplace_back(dataset_name,
                            resolve_dataset(dataset_name, data_path, target, synth_n, seed0));
  for (const auto& m : models) cfg.models.push_back(parse_model(m));
  cfg.protocols = {parse_protocol(protocol)};
  cfg.fraction = p_outlier;
  for (int s = 0; s < n_seeds; ++s) cfg.seeds.push_back(seed0 + s);
  cfg.opts = opts;
  cfg.threads = threads;

  const auto results = run_regression_suite(cfg);
  std::ostringstream csv;
  write_results_csv(results, csv);
  write_text(out_prefix + ".csv", csv.str());
  write_text(out_prefix + ".json", results_summary_json(results).dump(2) + "\n");
  if (gnuplot) {
    std::ostringstream plot;
    plot << "# seed mae nll (one block per dataset/model/protocol)\n";
    std::string last;
    for (const auto& r : results) {
      const std::string key = r.dataset + "/" + r.model + "/" + r.protocol;
      if (key != last) plot << "\n\n# " << key << "\n";
      last = key;
      plot << r.seed << " " << r.mae << " " << r.nll << "\n";
    }
    write_text(out_prefix + ".dat", plot.str());
  }
  if (!export_state.empty()) {
    // refit the first cell and export the posterior for reproducibility
    auto [train, test] = split(cfg.datasets[0].second, opts.test_fraction, cfg.seeds[0]);
    ContaminationSpec spec;
    spec.protocol = cfg.protocols[0];
    spec.fraction = p_outlier;
    spec.seed = stream_seed(cfg.seeds[0], 7);
    auto [train_c, hit] = contaminate(train, spec);
    const Standardizer xs = Standardizer::fit(train_c.x);
    const Standardizer ys = Standardizer::fit(train_c.y);
    const Mat xtr = xs.apply(train_c.x);
    const Vec ytr = ys.apply_vec(train_c.y);
    Hyperparams theta;
    theta.kernel.kind = opts.kernel;
    theta.kernel.lengthscale = Vec::Constant(1, median_heuristic_lengthscale(xtr));
    theta.sigma2 = 0.05;
    theta.robust.epsilon = opts.epsilon;
    theta.robust.beta = opts.beta;
    const auto actions = ActionMatrix::inducing(
        kcenter_rows(xtr, std::min<Eigen::Index>(opts.actions, xtr.rows())), xtr.rows());
    const auto st = fit(parse_model(models.at(0)), xtr, ytr, theta,
                        MeanSpec::constant(ytr.mean()), actions);
    write_text(export_state, export_state_json(st).dump(2) + "\n");
  }
  std::cout << "wrote " << out_prefix << ".csv and " << out_prefix << ".json ("
            << results.size() << " runs)\n";
  int failures = 0;
  for (const auto& r : results) {
    if (!r.failed) continue;
    ++failures;
    std::cerr << "run failed (" << r.dataset << "/" << r.model << "/seed " << r.seed
              << "): " << r.error << "\n";
  }
  return 0;
}

int cmd_bo(const std::string& task, const std::string& model, Eigen::Index actions, int budget,
           int q, int n_init, double p_outlier, const std::string& expert, double sigma2_corr,
           int mc_samples, int seeds, std::uint64_t seed0, double epsilon, bool paper_defaults,
           const std::string& out) {
  TestFunction fn;
  if (task == "hartmann6") fn = TestFunction::Hartmann6;
  else if (task == "branin2") fn = TestFunction::Branin2;
  else if (task == "gist1d") fn = TestFunction::Gist1D;
  else throw CLI::ValidationError("--task", "expected hartmann6|branin2|gist1d");

  BoConfig cfg;
  cfg.model = parse_model(model);
  cfg.actions = actions;
  cfg.budget = budget;
  cfg.q = q;
  cfg.n_init = n_init;
  cfg.p_outlier = p_outlier;
  cfg.mc_samples = mc_samples;
  cfg.sigma2_corr = sigma2_corr;
  cfg.robust.epsilon = epsilon;
  if (paper_defaults) {
    cfg.robust.beta = 1.0;
    cfg.lr_x = 0.001;  // Appendix-style query step size
    cfg.lr_model = 0.01;
  }
  if (expert == "perfect") cfg.expert = BoConfig::Expert::Perfect;
  else if (expert == "noisy") cfg.expert = BoConfig::Expert::Noisy;
  else if (expert != "none") throw CLI::ValidationError("--expert", "none|perfect|noisy");

  const Mat bounds = test_function_domain(fn);
  auto objective = [fn](const Vec& x) { return -test_function(fn, x); };  // maximize

  std::ofstream csv(out);
  if (!csv) throw std::runtime_error("cannot write " + out);
  csv << "seed,iter,best_true,wall_ms\n";
  csv.precision(12);
  for (int s = 0; s < seeds; ++s) {
    cfg.seed = seed0 + static_cast<std::uint64_t>(s);
    const BoHistory hist = bo_loop(objective, bounds, cfg);
    for (std::size_t it = 0; it < hist.best_true.size(); ++it)
      csv << cfg.seed << "," << (it + 1) << "," << hist.best_true[it] << ","
          << hist.wall_ms[it] << "\n";
    std::cout << "seed " << cfg.seed << ": best " << hist.best_true.back() << " ("
              << hist.outlier_data_indices.size() << " contaminated evals)\n";
  }
  std::cout << "wrote " << out << "\n";
  return 0;
}

int cmd_pif(const std::string& model, int n, std::uint64_t seed, Eigen::Index actions,
            double epsilon, const std::string& out_prefix) {
  const Dataset d = gist1d_dataset(n, 0.1, seed);
  const Standardizer ys = Standardizer::fit(d.y);
  Hyperparams theta;
  theta.kernel = KernelSpec::matern52(median_heuristic_lengthscale(d.x), 1.0);
  theta.sigma2 = 0.05;
  theta.robust.epsilon = epsilon;
  Vec grid(16);
  for (int j = 0; j < 16; ++j) grid[j] = std::pow(10.0, 1.0 + 5.0 * j / 15.0);
  const ModelKind kind = parse_model(model);
  const auto act = ActionMatrix::sparse_block(n, std::min<Eigen::Index>(actions, n));
  const PifCurve curve = pif_curve(kind, d.x, ys.apply_vec(d.y), n / 2, grid, theta,
                                   MeanSpec::constant(0.0), act);
  std::ofstream csv(out_prefix + ".csv");
  csv << "model,y_c,pif\n";
  csv.precision(12);
  for (Eigen::Index j = 0; j < grid.size(); ++j)
    csv << model << "," << curve.grid[j] << "," << curve.values[j] << "\n";
  const json summary = {{"model", model},
                        {"slope", curve.tail_slope},
                        {"bounded", curve.bounded}};
  write_text(out_prefix + ".json", summary.dump(2) + "\n");
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_diag(int n, int trials, std::uint64_t seed0, const std::string& out) {
  json report;
  double worst_rel1 = 0.0, worst_rel2 = 0.0;
  for (int t = 0; t < trials; ++t) {
    const Dataset d = gist1d_dataset(n, 0.1, seed0 + t);
    const Standardizer ys = Standardizer::fit(d.y);
    Hyperparams theta;
    theta.kernel = (t % 2 == 0) ? KernelSpec::matern52(0.8, 1.0) : KernelSpec::rbf(0.8, 1.0);
    theta.sigma2 = 0.05;
    const auto st = fit(ModelKind::RCaGP, d.x, ys.apply_vec(d.y), theta,
                        MeanSpec::constant(0.0), ActionMatrix::sparse_block(n, n / 3));
    const auto id = worst_case_identity(st, Vec::Constant(1, 3.5));
    worst_rel1 = std::max(worst_rel1, std::abs(id.lhs1 - id.rhs1) / (1.0 + std::abs(id.rhs1)));
    worst_rel2 = std::max(worst_rel2, std::abs(id.lhs2 - id.rhs2) / (1.0 + std::abs(id.rhs2)));
  }
  report["worst_case_identity"] = {{"trials", trials},
                                   {"max_rel_error_combined", worst_rel1},
                                   {"max_rel_error_computational", worst_rel2}};

  const Dataset d = gist1d_dataset(n, 0.1, seed0);
  const Standardizer ys = Standardizer::fit(d.y);
  Hyperparams theta;
  theta.kernel = KernelSpec::matern52(0.8, 1.0);
  theta.sigma2 = 0.05;
  std::vector<ActionMatrix> seq;
  for (Eigen::Index i : {n / 8, n / 4, n / 2, n})
    seq.push_back(
        ActionMatrix::from_dense(Mat::Identity(n, n).leftCols(std::max<Eigen::Index>(i, 1))));
  const auto rows = mean_convergence_check(d.x, ys.apply_vec(d.y), theta, seq);
  json conv = json::array();
  bool ok = true;
  for (const auto& r : rows) {
    conv.push_back({{"actions", r.actions}, {"lhs", r.lhs}, {"bound", r.bound}, {"rho", r.rho}});
    ok = ok && r.lhs <= r.bound + 1e-8 && r.rho <= 1.0 + 1e-10;
  }
  report["mean_convergence"] = {{"rows", conv}, {"bound_holds", ok}};
  if (!out.empty()) write_text(out, report.dump(2) + "\n");
  std::cout << report.dump(2) << "\n";
  return 0;
}

int cmd_ablate_c(const std::string& dataset_name, const std::string& data_path,
                 const std::string& target, Eigen::Index synth_n,
                 const std::vector<double>& epsilons, const std::string& protocol,
                 double p_outlier, int n_seeds, std::uint64_t seed0,
                 const RegressionOptions& opts, int threads, const std::string& out) {
  std::ofstream csv(out);
  if (!csv) throw std::runtime_error("cannot write " + out);
  csv << "epsilon,model,mae_mean,mae_std,nll_mean,nll_std\n";
  csv.precision(12);
  const Dataset data = resolve_dataset(dataset_name, data_path, target, synth_n, seed0);
  for (double eps : epsilons) {
    SuiteConfig cfg;
    cfg.datasets.emplace_back(dataset_name, data);
    cfg.models = {ModelKind::RCaGP};
    cfg.protocols = {parse_protocol(protocol)};
    cfg.fraction = p_outlier;
    for (int s = 0; s < n_seeds; ++s) cfg.seeds.push_back(seed0 + s);
    cfg.opts = opts;
    cfg.opts.epsilon = eps;
    cfg.threads = threads;
    const auto summary = results_summary_json(run_regression_suite(cfg));
    for (const auto& cell : summary)
      csv << eps << ",rcagp," << cell["mae_mean"].get<double>() << ","
          << cell["mae_std"].get<double>() << "," << cell["nll_mean"].get<double>() << ","
          << cell["nll_std"].get<double>() << "\n";
    std::cout << "epsilon " << eps << " done\n";
  }
  std::cout << "wrote " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust computation-aware Gaussian processes"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file (flat keys mirror the flags)");

  // regress ------------------------------------------------------------
  auto* regress = app.add_subcommand("regress", "regression experiment grid");
  std::string r_dataset = "gist1d", r_data, r_target = "y", r_protocol = "asymmetric";
  Eigen::Index r_synth_n = 200;
  std::vector<std::string> r_models{"rcagp", "cagp"};
  double r_p = 0.1;
  int r_seeds = 10, r_threads = 2;
  std::uint64_t r_seed0 = 0;
  RegressionOptions r_opts;
  bool r_paper = false, r_gnuplot = false;
  std::string r_out = "results", r_export, r_sigma_bar = "standardized", r_expert = "none",
              r_kernel = "matern52";
  regress->add_option("--dataset", r_dataset, "dataset name (gist1d|friedman|custom)");
  regress->add_option("--data", r_data, "CSV path for a custom dataset");
  regress->add_option("--target", r_target, "target column name or index");
  regress->add_option("--synthetic-n", r_synth_n, "points for synthetic datasets");
  regress->add_option("--model", r_models, "models to run (gp|rcgp|cagp|rcagp)");
  regress->add_option("--protocol", r_protocol, "contamination protocol");
  regress->add_option("--p-outlier", r_p, "contamination fraction");
  regress->add_option("--seeds", r_seeds, "number of seeds");
  regress->add_option("--seed", r_seed0, "base seed");
  regress->add_option("--actions", r_opts.actions, "number of actions");
  regress->add_option("--iters", r_opts.iters, "ELBO optimization iterations");
  regress->add_option("--lr", r_opts.lr, "ELBO optimizer learning rate");
  regress->add_option("--epsilon", r_opts.epsilon, "soft-threshold quantile level");
  double r_beta = -1.0;
  regress->add_option("--beta", r_beta, "weight learning rate (default sigma/sqrt(2))");
  regress->add_option("--kernel", r_kernel, "matern52|rbf");
  regress->add_flag("--ard", r_opts.ard, "per-dimension lengthscales");
  regress->add_option("--test-fraction", r_opts.test_fraction, "test split fraction");
  regress->add_option("--sigma-bar", r_sigma_bar, "contamination scale: standardized|raw");
  regress->add_option("--expert", r_expert, "expert mean: none|perfect|noisy");
  regress->add_option("--expert-feedback", r_opts.expert_feedback_csv,
                      "CSV of index,label,correction (train-split indices)");
  regress->add_option("--sigma2-corr", r_opts.sigma2_corr, "expert correction variance");
  regress->add_flag("--paper-defaults", r_paper, "preset: beta=1, eps=0.2, 50 iters, lr 0.01");
  regress->add_option("--threads", r_threads, "parallel cells");
  regress->add_option("--out", r_out, "output prefix");
  regress->add_option("--export-state", r_export, "write the first cell's posterior JSON");
  regress->add_flag("--gnuplot", r_gnuplot, "also write a gnuplot-ready .dat file");

  // bo -------------------------------------------------------------------
  auto* bo = app.add_subcommand("bo", "EULBO Bayesian optimization");
  std::string b_task = "hartmann6", b_model = "rcagp", b_expert = "none", b_out = "bo.csv";
  Eigen::Index b_actions = 25;
  int b_budget = 60, b_q = 1, b_init = 250, b_mc = 32, b_seeds = 5;
  double b_p = 0.25, b_sigma2corr = 1.0, b_eps = 0.2;
  std::uint64_t b_seed0 = 0;
  bool b_paper = false;
  bo->add_option("--task", b_task, "hartmann6|branin2|gist1d");
  bo->add_option("--model", b_model, "surrogate (gp|rcgp|cagp|rcagp)");
  bo->add_option("--actions", b_actions, "number of actions");
  bo->add_option("--budget", b_budget, "evaluation budget");
  bo->add_option("--q", b_q, "batch size");
  bo->add_option("--n-init", b_init, "initial design size");
  bo->add_option("--p-outlier", b_p, "per-evaluation contamination probability");
  bo->add_option("--expert", b_expert, "none|perfect|noisy");
  bo->add_option("--sigma2-corr", b_sigma2corr, "expert correction variance");
  bo->add_option("--mc-samples", b_mc, "Monte Carlo utility samples");
  bo->add_option("--epsilon", b_eps, "soft-threshold quantile level");
  bo->add_option("--seeds", b_seeds, "number of repetitions");
  bo->add_option("--seed", b_seed0, "base seed");
  bo->add_flag("--paper-defaults", b_paper, "preset: beta=1, step sizes 0.001/0.01");
  bo->add_option("--out", b_out, "output CSV");

  // pif --------------------------------------------------------------------
  auto* pifc = app.add_subcommand("pif", "posterior influence curve");
  std::string p_model = "rcagp", p_out = "pif";
  int p_n = 20;
  Eigen::Index p_actions = 5;
  double p_eps = 0.2;
  std::uint64_t p_seed = 0;
  pifc->add_option("--model", p_model, "gp|rcgp|cagp|rcagp");
  pifc->add_option("--n", p_n, "training points");
  pifc->add_option("--actions", p_actions, "number of actions");
  pifc->add_option("--epsilon", p_eps, "soft-threshold quantile level");
  pifc->add_option("--seed", p_seed, "seed");
  pifc->add_option("--out", p_out, "output prefix");

  // diag -------------------------------------------------------------------
  auto* diag = app.add_subcommand("diag", "worst-case and convergence identity checks");
  int d_n = 24, d_trials = 20;
  std::uint64_t d_seed = 0;
  std::string d_out;
  diag->add_option("--n", d_n, "training points");
  diag->add_option("--trials", d_trials, "random instances");
  diag->add_option("--seed", d_seed, "base seed");
  diag->add_option("--out", d_out, "optional JSON report path");

  // ablate-c -----------------------------------------------------------------
  auto* ablate = app.add_subcommand("ablate-c", "epsilon sweep for the soft threshold");
  std::string a_dataset = "gist1d", a_data, a_target = "y", a_protocol = "asymmetric",
              a_out = "ablate_c.csv";
  Eigen::Index a_synth_n = 200;
  std::vector<double> a_eps{0.05, 0.1, 0.15, 0.2, 0.3};
  double a_p = 0.1;
  int a_seeds = 5, a_threads = 2;
  std::uint64_t a_seed0 = 0;
  RegressionOptions a_opts;
  ablate->add_option("--dataset", a_dataset, "dataset name");
  ablate->add_option("--data", a_data, "CSV path");
  ablate->add_option("--target", a_target, "target column");
  ablate->add_option("--synthetic-n", a_synth_n, "points for synthetic datasets");
  ablate->add_option("--epsilons", a_eps, "epsilon grid");
  ablate->add_option("--protocol", a_protocol, "contamination protocol");
  ablate->add_option("--p-outlier", a_p, "contamination fraction");
  ablate->add_option("--seeds", a_seeds, "seeds per epsilon");
  ablate->add_option("--seed", a_seed0, "base seed");
  ablate->add_option("--iters", a_opts.iters, "ELBO iterations");
  ablate->add_option("--actions", a_opts.actions, "number of actions");
  ablate->add_option("--threads", a_threads, "parallel cells");
  ablate->add_option("--out", a_out, "output CSV");

  try {
    app.parse(argc, argv);
    apply_config_file(app, config_path);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (regress->parsed()) {
      if (r_beta > 0.0) r_opts.beta = r_beta;
      if (r_kernel == "rbf") r_opts.kernel = KernelKind::RBF;
      else if (r_kernel != "matern52")
        throw std::invalid_argument("--kernel: matern52|rbf");
      if (r_sigma_bar == "raw") r_opts.sigma_bar = RegressionOptions::SigmaBar::Raw;
      else if (r_sigma_bar != "standardized")
        throw std::invalid_argument("--sigma-bar: standardized|raw");
      if (r_expert == "perfect") r_opts.expert = RegressionOptions::Expert::Perfect;
      else if (r_expert == "noisy") r_opts.expert = RegressionOptions::Expert::Noisy;
      else if (r_expert != "none") throw std::invalid_argument("--expert: none|perfect|noisy");
      return cmd_regress(r_dataset, r_data, r_target, r_synth_n, r_models, r_protocol, r_p,
                         r_seeds, r_seed0, r_opts, r_paper, r_threads, r_out, r_export,
                         r_gnuplot);
    }
    if (bo->parsed())
      return cmd_bo(b_task, b_model, b_actions, b_budget, b_q, b_init, b_p, b_expert,
                    b_sigma2corr, b_mc, b_seeds, b_seed0, b_eps, b_paper, b_out);
    if (pifc->parsed()) return cmd_pif(p_model, p_n, p_seed, p_actions, p_eps, p_out);
    if (diag->parsed()) return cmd_diag(d_n, d_trials, d_seed, d_out);
    if (ablate->parsed())
      return cmd_ablate_c(a_dataset, a_data, a_target, a_synth_n, a_eps, a_protocol, a_p,
                          a_seeds, a_seed0, a_opts, a_threads, a_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
