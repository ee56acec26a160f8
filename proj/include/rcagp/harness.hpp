#pragma once

#include <atomic>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "rcagp/bayesopt.hpp"
#include "rcagp/expert_prior.hpp"
#include "rcagp/model_selection.hpp"

namespace rcagp {

// ---------------------------------------------------------------------------
// datasets

struct Dataset {
  Mat x;
  Vec y;
  std::vector<std::string> feature_names;
  std::string target_name;

  Eigen::Index n() const { return x.rows(); }
  Eigen::Index dim() const { return x.cols(); }
};

/// Per-column affine standardizer (z-score with a degenerate-scale guard).
struct Standardizer {
  Vec mean, scale;

  static Standardizer fit(const Eigen::Ref<const Mat>& m) {
    Standardizer s;
    s.mean = m.colwise().mean();
    s.scale.resize(m.cols());
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const double var =
          (m.col(c).array() - s.mean[c]).square().sum() / std::max<Eigen::Index>(m.rows() - 1, 1);
      s.scale[c] = std::sqrt(var) > 1e-12 ? std::sqrt(var) : 1.0;
    }
    return s;
  }
  Mat apply(const Eigen::Ref<const Mat>& m) const {
    return ((m.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array())
        .matrix();
  }
  Vec apply_vec(const Eigen::Ref<const Vec>& v) const { return (v.array() - mean[0]) / scale[0]; }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(trim(tok));
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

inline bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  try {
    std::size_t used = 0;
    out = std::stod(s, &used);
    return used == s.size();
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace detail

/// CSV ingestion. Header row required; the target column is selected by name
/// or by zero-based index. Columns that fail to parse as numeric on any row
/// are dropped with a warning; rows with the wrong field count are an error
/// naming the line.
inline Dataset load_csv(const std::string& path, const std::string& target) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_csv: cannot open " + path);
  std::string line;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (header.empty()) {
      header = cells;
      continue;
    }
    if (cells.size() != header.size())
      throw std::runtime_error("load_csv: malformed row at line " + std::to_string(lineno) +
                               " (expected " + std::to_string(header.size()) + " fields, got " +
                               std::to_string(cells.size()) + ")");
    rows.push_back(std::move(cells));
  }
  if (header.empty()) throw std::runtime_error("load_csv: empty file " + path);
  if (rows.empty()) throw std::runtime_error("load_csv: no data rows in " + path);

  // resolve target by name, else by index
  Eigen::Index target_col = -1;
  for (std::size_t c = 0; c < header.size(); ++c)
    if (header[c] == target) target_col = static_cast<Eigen::Index>(c);
  if (target_col < 0) {
    double idx;
    if (detail::parse_double(target, idx) && idx >= 0 && idx < header.size() &&
        idx == std::floor(idx))
      target_col = static_cast<Eigen::Index>(idx);
  }
  if (target_col < 0)
    throw std::invalid_argument("load_csv: target column '" + target + "' not found");

  std::vector<bool> numeric(header.size(), true);
  Mat raw(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(header.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < header.size(); ++c) {
      double v = 0.0;
      if (!detail::parse_double(rows[r][c], v)) numeric[c] = false;
      raw(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
    }
  if (!numeric[target_col])
    throw std::runtime_error("load_csv: target column is not numeric in " + path);

  Dataset d;
  d.target_name = header[target_col];
  d.y = raw.col(target_col);
  std::vector<Eigen::Index> keep;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (static_cast<Eigen::Index>(c) == target_col) continue;
    if (!numeric[c]) {
      std::cerr << "load_csv: dropping non-numeric column '" << header[c] << "'\n";
      continue;
    }
    keep.push_back(static_cast<Eigen::Index>(c));
    d.feature_names.push_back(header[c]);
  }
  if (keep.empty()) throw std::runtime_error("load_csv: no numeric feature columns in " + path);
  d.x.resize(raw.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c)
    d.x.col(static_cast<Eigen::Index>(c)) = raw.col(keep[c]);
  return d;
}

inline void write_csv(const Dataset& d, const std::string& path) {
  std::ofstream out(path);
  for (std::size_t c = 0; c < d.feature_names.size(); ++c) out << d.feature_names[c] << ",";
  out << (d.target_name.empty() ? "target" : d.target_name) << "\n";
  out.precision(17);
  for (Eigen::Index r = 0; r < d.n(); ++r) {
    for (Eigen::Index c = 0; c < d.dim(); ++c) out << d.x(r, c) << ",";
    out << d.y[r] << "\n";
  }
}

/// Deterministic shuffled split; the first floor(fraction n) shuffled rows
/// form the test set.
inline std::pair<Dataset, Dataset> split(const Dataset& d, double test_fraction,
                                         std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw std::invalid_argument("split: fraction must lie in (0,1)");
  std::vector<Eigen::Index> idx(d.n());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 eng(seed);
  std::shuffle(idx.begin(), idx.end(), eng);
  const auto n_test = static_cast<Eigen::Index>(std::floor(test_fraction * d.n()));
  Dataset test, train;
  test.feature_names = train.feature_names = d.feature_names;
  test.target_name = train.target_name = d.target_name;
  test.x.resize(n_test, d.dim());
  test.y.resize(n_test);
  train.x.resize(d.n() - n_test, d.dim());
  train.y.resize(d.n() - n_test);
  for (Eigen::Index j = 0; j < n_test; ++j) {
    test.x.row(j) = d.x.row(idx[j]);
    test.y[j] = d.y[idx[j]];
  }
  for (Eigen::Index j = n_test; j < d.n(); ++j) {
    train.x.row(j - n_test) = d.x.row(idx[j]);
    train.y[j - n_test] = d.y[idx[j]];
  }
  return {train, test};
}

// ---------------------------------------------------------------------------
// contamination

struct ContaminationSpec {
  enum class Protocol { None, Asymmetric, Uniform, Focused, BoChannel };
  Protocol protocol = Protocol::None;
  double fraction = 0.1;
  double lo = 3.0, hi = 9.0;  // magnitude bounds in units of sigma-bar
  std::uint64_t seed = 0;

  void validate() const {
    if (!(fraction >= 0.0 && fraction <= 1.0))
      throw std::invalid_argument("ContaminationSpec: fraction in [0,1]");
    if (!(lo <= hi)) throw std::invalid_argument("ContaminationSpec: bounds out of order");
  }
};

inline const char* protocol_name(ContaminationSpec::Protocol p) {
  switch (p) {
    case ContaminationSpec::Protocol::None: return "none";
    case ContaminationSpec::Protocol::Asymmetric: return "asymmetric";
    case ContaminationSpec::Protocol::Uniform: return "uniform";
    case ContaminationSpec::Protocol::Focused: return "focused";
    case ContaminationSpec::Protocol::BoChannel: return "bochannel";
  }
  return "?";
}

namespace detail {

inline double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    std::nth_element(v.begin(), v.begin() + mid - 1, v.end());
    m = 0.5 * (m + v[mid - 1]);
  }
  return m;
}

inline double mad_of(const std::vector<double>& v) {
  const double med = median_of(v);
  std::vector<double> dev(v.size());
  for (std::size_t j = 0; j < v.size(); ++j) dev[j] = std::abs(v[j] - med);
  return median_of(dev);
}

}  // namespace detail

/// Contaminate a training split in place-copy; returns the contaminated data
/// and the true outlier indices for the simulated expert. sigma-bar is the
/// sample standard deviation of the incoming (clean) targets.
inline std::pair<Dataset, std::vector<Eigen::Index>> contaminate(const Dataset& train,
                                                                 const ContaminationSpec& spec) {
  spec.validate();
  Dataset out = train;
  std::vector<Eigen::Index> hit;
  const Eigen::Index n = train.n();
  if (n == 0 || spec.protocol == ContaminationSpec::Protocol::None) return {out, hit};

  RngStream rng(stream_seed(spec.seed, 41));
  const double mean_y = train.y.mean();
  const double sigma_bar = std::max(
      std::sqrt((train.y.array() - mean_y).square().sum() / std::max<Eigen::Index>(n - 1, 1)),
      1e-12);

  if (spec.protocol == ContaminationSpec::Protocol::BoChannel) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const bool flip = rng.uniform(0.0, 1.0) < spec.fraction;
      const double bump = rng.uniform(spec.lo * sigma_bar, spec.hi * sigma_bar);
      if (flip) {
        out.y[j] += bump;
        hit.push_back(j);
      }
    }
    return {out, hit};
  }

  const auto count = static_cast<Eigen::Index>(std::floor(spec.fraction * n));
  std::vector<Eigen::Index> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng.engine());
  idx.resize(count);

  switch (spec.protocol) {
    case ContaminationSpec::Protocol::Asymmetric:
      for (auto j : idx) out.y[j] -= rng.uniform(spec.lo * sigma_bar, spec.hi * sigma_bar);
      break;
    case ContaminationSpec::Protocol::Uniform: {
      // half of the selected subset shifts up, the other half down
      for (std::size_t t = 0; t < idx.size(); ++t) {
        const double noise = rng.uniform(spec.lo * sigma_bar, spec.hi * sigma_bar);
        out.y[idx[t]] += (t < (idx.size() + 1) / 2) ? noise : -noise;
      }
      break;
    }
    case ContaminationSpec::Protocol::Focused: {
      // park the inputs at the per-dimension medians (jittered by 0.1 MAD)
      // and the outputs three sigma below the median response
      const Eigen::Index d = train.dim();
      Vec med(d), mad(d);
      for (Eigen::Index c = 0; c < d; ++c) {
        std::vector<double> col(train.x.col(c).data(), train.x.col(c).data() + n);
        med[c] = detail::median_of(col);
        mad[c] = detail::mad_of(col);
      }
      std::vector<double> ys(train.y.data(), train.y.data() + n);
      const double med_y = detail::median_of(ys);
      const double mad_y = detail::mad_of(ys);
      for (auto j : idx) {
        for (Eigen::Index c = 0; c < d; ++c)
          out.x(j, c) = med[c] + 0.1 * mad[c] * rng.uniform(0.0, 1.0);
        out.y[j] = med_y - 3.0 * sigma_bar + 0.1 * mad_y * rng.uniform(0.0, 1.0);
      }
      break;
    }
    default:
      break;
  }
  hit = idx;
  std::sort(hit.begin(), hit.end());
  return {out, hit};
}

// ---------------------------------------------------------------------------
// metrics

inline double mae(const Eigen::Ref<const Vec>& pred_means, const Eigen::Ref<const Vec>& y_true) {
  if (pred_means.size() != y_true.size()) throw std::invalid_argument("mae: length mismatch");
  return (pred_means - y_true).cwiseAbs().mean();
}

/// Mean negative log-likelihood; predictive variances include the
/// observation noise (var_total + sigma2).
inline double nll(const std::vector<PredictiveDist>& preds, const Eigen::Ref<const Vec>& y_true,
                  double sigma2) {
  if (static_cast<Eigen::Index>(preds.size()) != y_true.size())
    throw std::invalid_argument("nll: length mismatch");
  double acc = 0.0;
  for (Eigen::Index j = 0; j < y_true.size(); ++j) {
    const double v = preds[static_cast<std::size_t>(j)].var_total + sigma2;
    if (!(v > 0.0)) throw std::invalid_argument("nll: nonpositive predictive variance");
    const double r = y_true[j] - preds[static_cast<std::size_t>(j)].mean;
    acc += 0.5 * std::log(2.0 * M_PI * v) + r * r / (2.0 * v);
  }
  return acc / static_cast<double>(y_true.size());
}

// ---------------------------------------------------------------------------
// regression experiment cells

struct RegressionOptions {
  Eigen::Index actions = 25;
  int iters = 50;
  double lr = 0.01;
  double epsilon = 0.2;
  std::optional<double> beta;  // empty: sigma/sqrt(2) library default
  KernelKind kernel = KernelKind::Matern52;
  bool ard = false;
  double test_fraction = 0.2;
  enum class SigmaBar { Standardized, Raw } sigma_bar = SigmaBar::Standardized;
  enum class Expert { None, Perfect, Noisy } expert = Expert::None;
  double sigma2_corr = 1.0;
  std::string expert_feedback_csv;  // overrides the simulated expert; indices
                                    // address the train split, corrections in
                                    // raw target units
};

struct RunResult {
  std::string model, dataset, protocol;
  std::uint64_t seed = 0;
  double mae = 0.0, nll = 0.0, wall_ms = 0.0;
  bool failed = false;
  std::string error;
};

/// Synthetic 1D task: sin(3x) + 0.3x^2 on [-3, 3] plus Gaussian noise.
inline Dataset gist1d_dataset(Eigen::Index n, double noise_sd, std::uint64_t seed) {
  RngStream rng(stream_seed(seed, 11));
  Dataset d;
  d.feature_names = {"x"};
  d.target_name = "y";
  d.x.resize(n, 1);
  d.y.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    d.x(j, 0) = rng.uniform(-3.0, 3.0);
    d.y[j] = test_function(TestFunction::Gist1D, Vec(d.x.row(j))) + noise_sd * rng.normal();
  }
  return d;
}

/// Nonlinear multivariate regression stand-in exercised through the CSV path.
inline Dataset friedman_dataset(Eigen::Index n, double noise_sd, std::uint64_t seed) {
  RngStream rng(stream_seed(seed, 13));
  Dataset d;
  for (int c = 0; c < 6; ++c) d.feature_names.push_back("x" + std::to_string(c));
  d.target_name = "y";
  d.x.resize(n, 6);
  d.y.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (int c = 0; c < 6; ++c) d.x(j, c) = rng.uniform(0.0, 1.0);
    d.y[j] = 10.0 * std::sin(M_PI * d.x(j, 0) * d.x(j, 1)) +
             20.0 * std::pow(d.x(j, 2) - 0.5, 2.0) + 10.0 * d.x(j, 3) + 5.0 * d.x(j, 4) +
             noise_sd * rng.normal();
  }
  return d;
}

/// Greedy max-min (k-center) row selection, used to place inducing actions
/// on well-separated training points so the projected system stays
/// numerically full rank.
inline Mat kcenter_rows(const Eigen::Ref<const Mat>& x, Eigen::Index count) {
  const Eigen::Index n = x.rows();
  count = std::min(count, n);
  std::vector<Eigen::Index> chosen{0};
  Vec dist = (x.rowwise() - x.row(0)).rowwise().squaredNorm();
  while (static_cast<Eigen::Index>(chosen.size()) < count) {
    Eigen::Index far = 0;
    dist.maxCoeff(&far);
    chosen.push_back(far);
    dist = dist.cwiseMin((x.rowwise() - x.row(far)).rowwise().squaredNorm());
  }
  Mat z(count, x.cols());
  for (Eigen::Index j = 0; j < count; ++j) z.row(j) = x.row(chosen[j]);
  return z;
}

/// One (dataset, model, protocol, seed) cell: split, contaminate the train
/// half, standardize with the contaminated train statistics, pick the soft
/// threshold by the quantile rule, optimize the ELBO and score the test set.
inline RunResult run_regression_cell(const std::string& dataset_name, const Dataset& full,
                                     ModelKind model, ContaminationSpec contamination,
                                     const RegressionOptions& opts, std::uint64_t seed) {
  RunResult res;
  res.model = model_name(model);
  res.dataset = dataset_name;
  res.protocol = protocol_name(contamination.protocol);
  res.seed = seed;
  try {
    auto [train_raw, test_raw] = split(full, opts.test_fraction, seed);
    contamination.seed = stream_seed(seed, 7);

    Dataset train_c;
    std::vector<Eigen::Index> outliers;
    if (opts.sigma_bar == RegressionOptions::SigmaBar::Standardized) {
      // contaminate on the clean-standardized scale (sigma-bar = 1), then
      // map back; affine-equivariant, so the convention is explicit
      const Standardizer ys = Standardizer::fit(train_raw.y);
      Dataset t = train_raw;
      t.y = ys.apply_vec(train_raw.y);
      std::tie(train_c, outliers) = contaminate(t, contamination);
      train_c.y = (train_c.y.array() * ys.scale[0] + ys.mean[0]).matrix();
    } else {
      std::tie(train_c, outliers) = contaminate(train_raw, contamination);
    }

    // standardization statistics from the contaminated train split only
    const Standardizer xs = Standardizer::fit(train_c.x);
    const Standardizer ys = Standardizer::fit(train_c.y);
    const Mat x_train = xs.apply(train_c.x);
    const Vec y_train = ys.apply_vec(train_c.y);
    const Mat x_test = xs.apply(test_raw.x);
    const Vec y_test = ys.apply_vec(test_raw.y);
    const Vec y_clean_std = ys.apply_vec(train_raw.y);

    MeanSpec mean = MeanSpec::constant(y_train.mean());
    std::shared_ptr<ExpertPriorTable> table;
    if (!opts.expert_feedback_csv.empty()) {
      ExpertFeedback fb = load_feedback_csv(opts.expert_feedback_csv, opts.sigma2_corr);
      fb.corrections = ys.apply_vec(fb.corrections);
      const KernelSpec l = KernelSpec::rbf(median_heuristic_lengthscale(x_train), 1.0);
      table = std::make_shared<ExpertPriorTable>(build_expert_prior(x_train, y_train, fb, l));
      mean = make_expert_mean(table);
    } else if (opts.expert != RegressionOptions::Expert::None && !outliers.empty()) {
      RngStream erng(stream_seed(seed, 23));
      ExpertFeedback fb =
          simulate_expert(outliers, y_clean_std, opts.sigma2_corr,
                          opts.expert == RegressionOptions::Expert::Noisy, &erng);
      const KernelSpec l = KernelSpec::rbf(median_heuristic_lengthscale(x_train), 1.0);
      table = std::make_shared<ExpertPriorTable>(build_expert_prior(x_train, y_train, fb, l));
      mean = make_expert_mean(table);
    }

    Hyperparams theta;
    const double ls = median_heuristic_lengthscale(x_train);
    theta.kernel.kind = opts.kernel;
    theta.kernel.lengthscale = Vec::Constant(opts.ard ? x_train.cols() : 1, ls);
    theta.kernel.outputscale = 1.0;
    theta.sigma2 = 0.05;
    theta.robust.epsilon = opts.epsilon;
    theta.robust.beta = opts.beta;

    const Eigen::Index n_act = std::min<Eigen::Index>(opts.actions, x_train.rows());
    const ActionMatrix actions = ActionMatrix::inducing(kcenter_rows(x_train, n_act),
                                                        x_train.rows());

    const auto t0 = std::chrono::steady_clock::now();
    OptConfig opt;
    opt.lr = opts.lr;
    opt.max_iters = opts.iters;
    const OptResult fitres = optimize_hyperparams(x_train, y_train, mean, theta, actions, opt);
    const PosteriorState st = fit(model, x_train, y_train, fitres.theta, mean, fitres.actions);

    Vec means(x_test.rows());
    std::vector<PredictiveDist> preds(static_cast<std::size_t>(x_test.rows()));
    for (Eigen::Index j = 0; j < x_test.rows(); ++j) {
      preds[static_cast<std::size_t>(j)] = predict(st, Vec(x_test.row(j)));
      means[j] = preds[static_cast<std::size_t>(j)].mean;
    }
    res.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    res.mae = mae(means, y_test);
    res.nll = nll(preds, y_test, st.theta.sigma2);
  } catch (const std::exception& e) {
    res.failed = true;
    res.error = e.what();
    res.mae = res.nll = std::numeric_limits<double>::quiet_NaN();
  }
  return res;
}

// ---------------------------------------------------------------------------
// suite runner

struct SuiteConfig {
  std::vector<std::pair<std::string, Dataset>> datasets;
  std::vector<ModelKind> models;
  std::vector<ContaminationSpec::Protocol> protocols;
  double fraction = 0.1;
  std::vector<std::uint64_t> seeds;
  RegressionOptions opts;
  int threads = 1;
};

/// Grid of cells; failures are recorded and the suite continues. Results are
/// merged in sorted key order so the output is schedule independent.
inline std::vector<RunResult> run_regression_suite(const SuiteConfig& cfg) {
  struct Cell {
    std::size_t dataset;
    ModelKind model;
    ContaminationSpec::Protocol protocol;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (std::size_t d = 0; d < cfg.datasets.size(); ++d)
    for (auto m : cfg.models)
      for (auto p : cfg.protocols)
        for (auto s : cfg.seeds) cells.push_back({d, m, p, s});

  std::vector<RunResult> results(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t j = next.fetch_add(1);
      if (j >= cells.size()) return;
      const Cell& c = cells[j];
      ContaminationSpec spec;
      spec.protocol = c.protocol;
      spec.fraction = cfg.fraction;
      results[j] = run_regression_cell(cfg.datasets[c.dataset].first,
                                       cfg.datasets[c.dataset].second, c.model, spec, cfg.opts,
                                       c.seed);
    }
  };
  const int nthreads = std::max(1, cfg.threads);
  std::vector<std::thread> pool;
  for (int t = 1; t < nthreads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::sort(results.begin(), results.end(), [](const RunResult& a, const RunResult& b) {
    return std::tie(a.dataset, a.model, a.protocol, a.seed) <
           std::tie(b.dataset, b.model, b.protocol, b.seed);
  });
  return results;
}

inline void write_results_csv(const std::vector<RunResult>& results, std::ostream& out) {
  out << "dataset,model,protocol,seed,mae,nll,wall_ms\n";
  out.precision(12);
  for (const auto& r : results)
    out << r.dataset << "," << r.model << "," << r.protocol << "," << r.seed << "," << r.mae
        << "," << r.nll << "," << r.wall_ms << "\n";
}

/// Mean and sample (n-1) standard deviation per (dataset, model, protocol).
inline nlohmann::json results_summary_json(const std::vector<RunResult>& results) {
  std::map<std::string, std::vector<const RunResult*>> groups;
  for (const auto& r : results)
    groups[r.dataset + "/" + r.model + "/" + r.protocol].push_back(&r);
  nlohmann::json out = nlohmann::json::array();
  for (const auto& [key, rs] : groups) {
    auto stats = [&](auto getter) {
      double mean = 0.0;
      int count = 0;
      for (auto* r : rs)
        if (!r->failed) {
          mean += getter(*r);
          ++count;
        }
      mean /= std::max(count, 1);
      double var = 0.0;
      for (auto* r : rs)
        if (!r->failed) var += std::pow(getter(*r) - mean, 2.0);
      var = count > 1 ? var / (count - 1) : 0.0;
      return std::make_pair(mean, std::sqrt(var));
    };
    const auto [mae_m, mae_s] = stats([](const RunResult& r) { return r.mae; });
    const auto [nll_m, nll_s] = stats([](const RunResult& r) { return r.nll; });
    int failures = 0;
    for (auto* r : rs) failures += r->failed ? 1 : 0;
    out.push_back({{"cell", key},
                   {"runs", rs.size()},
                   {"failures", failures},
                   {"mae_mean", mae_m},
                   {"mae_std", mae_s},
                   {"nll_mean", nll_m},
                   {"nll_std", nll_s}});
  }
  return out;
}

}  // namespace rcagp
