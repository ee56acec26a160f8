#pragma once

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <vector>

#include "rcagp/kernels.hpp"
#include "rcagp/rng.hpp"

namespace rcagp {

/// Outlier identifications and corrections supplied by a domain expert.
struct ExpertFeedback {
  std::vector<Eigen::Index> outlier_indices;
  std::vector<int> labels;   // o_bar, 1 = confirmed outlier
  Vec corrections;           // y_bar
  double sigma2_corr = 1.0;

  void validate(Eigen::Index n) const {
    if (labels.size() != outlier_indices.size() ||
        corrections.size() != static_cast<Eigen::Index>(outlier_indices.size()))
      throw std::invalid_argument("ExpertFeedback: inconsistent lengths");
    if (!(sigma2_corr > 0.0))
      throw std::invalid_argument("ExpertFeedback: sigma2_corr must be positive");
    std::set<Eigen::Index> seen;
    for (auto idx : outlier_indices) {
      if (idx < 0 || idx >= n) throw std::invalid_argument("ExpertFeedback: index out of range");
      if (!seen.insert(idx).second)
        throw std::invalid_argument("ExpertFeedback: duplicate index");
    }
  }
};

/// Per-outlier posterior expectations plus the smoothing kernel.
struct ExpertPriorTable {
  Vec e_delta;  // E[delta_o], each in [0, 1]
  Vec e_mu;     // E[mu_bar_o]
  Mat x_o;      // outlier locations
  KernelSpec l = KernelSpec::rbf(1.0, 1.0);
  bool constant_mean = false;  // averaged without the kernel weight

  Eigen::Index size() const { return e_delta.size(); }
};

/// Beta-Bernoulli posterior mean of the outlier label, with alpha set from
/// the z-score of the flagged value against the data pool.
inline double label_posterior_mean(double y_hat, double pool_mean, double pool_std, int o_bar,
                                   double beta_o = 0.0) {
  if (!(pool_std > 0.0))
    throw std::invalid_argument("label_posterior_mean: pool_std must be positive");
  const double alpha = std::abs((y_hat - pool_mean) / pool_std);
  return (alpha + o_bar) / (alpha + beta_o + 1.0);
}

/// Normal-Normal posterior mean of the corrected value. The prior is moment
/// matched to the J nearest inlier responses; zero neighbor variance clamps
/// the precision at 1e6 so the neighborhood dominates.
inline double correction_posterior_mean(double y_bar, const Eigen::Ref<const Vec>& neighbor_ys,
                                        double sigma2_corr) {
  if (neighbor_ys.size() < 2)
    throw std::invalid_argument("correction_posterior_mean: need at least two neighbors");
  if (!(sigma2_corr > 0.0))
    throw std::invalid_argument("correction_posterior_mean: sigma2_corr must be positive");
  const double mu = neighbor_ys.mean();
  const double var =
      (neighbor_ys.array() - mu).square().sum() / (neighbor_ys.size() - 1.0);
  const double tau = var > 0.0 ? std::min(1.0 / var, 1e6) : 1e6;
  const double prec_corr = 1.0 / sigma2_corr;
  return (tau * mu + prec_corr * y_bar) / (tau + prec_corr);
}

/// Median-heuristic lengthscale over (a subsample of) the inputs.
inline double median_heuristic_lengthscale(const Eigen::Ref<const Mat>& x,
                                           Eigen::Index max_points = 300) {
  const Eigen::Index n = std::min(x.rows(), max_points);
  std::vector<double> d2;
  d2.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = a + 1; b < n; ++b)
      d2.push_back((x.row(a) - x.row(b)).squaredNorm());
  if (d2.empty()) return 1.0;
  std::nth_element(d2.begin(), d2.begin() + d2.size() / 2, d2.end());
  const double med = std::sqrt(d2[d2.size() / 2]);
  return med > 0.0 ? med : 1.0;
}

/// Build the table: pool statistics over the full response vector, neighbors
/// picked as the J largest kernel similarities among inliers (all inliers
/// when fewer than J exist).
inline ExpertPriorTable build_expert_prior(const Eigen::Ref<const Mat>& x,
                                           const Eigen::Ref<const Vec>& y,
                                           const ExpertFeedback& fb, const KernelSpec& l,
                                           int j_neighbors = 3) {
  fb.validate(y.size());
  if (fb.outlier_indices.empty())
    throw std::invalid_argument("build_expert_prior: no identified outliers");
  const Eigen::Index n = y.size();
  const double pool_mean = y.mean();
  const double pool_std =
      n > 1 ? std::sqrt((y.array() - pool_mean).square().sum() / (n - 1.0)) : 1.0;

  std::set<Eigen::Index> flagged(fb.outlier_indices.begin(), fb.outlier_indices.end());
  std::vector<Eigen::Index> inliers;
  for (Eigen::Index j = 0; j < n; ++j)
    if (!flagged.count(j)) inliers.push_back(j);

  ExpertPriorTable table;
  table.l = l;
  const auto count = static_cast<Eigen::Index>(fb.outlier_indices.size());
  table.e_delta.resize(count);
  table.e_mu.resize(count);
  table.x_o.resize(count, x.cols());

  for (Eigen::Index o = 0; o < count; ++o) {
    const Eigen::Index idx = fb.outlier_indices[o];
    table.x_o.row(o) = x.row(idx);
    table.e_delta[o] =
        std::max(0.0, std::min(1.0, label_posterior_mean(y[idx], pool_mean,
                                                         std::max(pool_std, 1e-12),
                                                         fb.labels[o])));
    // rank inliers by kernel similarity to x_o
    std::vector<std::pair<double, Eigen::Index>> sim;
    sim.reserve(inliers.size());
    for (auto in : inliers)
      sim.emplace_back(kernel_eval(l, Vec(x.row(idx)), Vec(x.row(in))), in);
    std::sort(sim.begin(), sim.end(), [](const auto& a, const auto& b) {
      return a.first > b.first || (a.first == b.first && a.second < b.second);
    });
    const auto take = std::min<std::size_t>(sim.size(), static_cast<std::size_t>(j_neighbors));
    Vec neigh(static_cast<Eigen::Index>(take));
    for (std::size_t t = 0; t < take; ++t) neigh[static_cast<Eigen::Index>(t)] = y[sim[t].second];
    if (take >= 2) {
      table.e_mu[o] = correction_posterior_mean(fb.corrections[o], neigh, fb.sigma2_corr);
    } else {
      // degenerate neighborhood: precision clamp, prior pinned at the lone value
      const double mu = take == 1 ? neigh[0] : pool_mean;
      const double prec_corr = 1.0 / fb.sigma2_corr;
      table.e_mu[o] = (1e6 * mu + prec_corr * fb.corrections[o]) / (1e6 + prec_corr);
    }
  }
  return table;
}

/// Kernel-weighted average over all recorded outliers; the constant variant
/// drops the kernel factor. Empty table evaluates to zero.
inline double expert_mean_eval(const ExpertPriorTable& table, const Eigen::Ref<const Vec>& x) {
  if (table.size() == 0) return 0.0;
  double acc = 0.0;
  for (Eigen::Index o = 0; o < table.size(); ++o) {
    const double w = table.constant_mean ? 1.0 : kernel_eval(table.l, x, Vec(table.x_o.row(o)));
    acc += table.e_delta[o] * table.e_mu[o] * w;
  }
  return acc / static_cast<double>(table.size());
}

inline MeanSpec make_expert_mean(std::shared_ptr<const ExpertPriorTable> table) {
  auto fn = std::make_shared<const std::function<double(const Eigen::Ref<const Vec>&)>>(
      [table](const Eigen::Ref<const Vec>& x) { return expert_mean_eval(*table, x); });
  return MeanSpec::expert_guided(std::move(fn));
}

/// Feedback ingestion: CSV with header index,label,correction.
inline ExpertFeedback load_feedback_csv(const std::string& path, double sigma2_corr = 1.0) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_feedback_csv: cannot open " + path);
  ExpertFeedback fb;
  fb.sigma2_corr = sigma2_corr;
  std::string line;
  std::vector<double> corr;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (lineno == 1 && line.find("index") != std::string::npos) continue;
    std::stringstream ss(line);
    std::string tok;
    std::vector<std::string> cells;
    while (std::getline(ss, tok, ',')) cells.push_back(tok);
    if (cells.size() != 3)
      throw std::runtime_error("load_feedback_csv: malformed row at line " +
                               std::to_string(lineno));
    try {
      fb.outlier_indices.push_back(std::stol(cells[0]));
      fb.labels.push_back(std::stoi(cells[1]));
      corr.push_back(std::stod(cells[2]));
    } catch (const std::exception&) {
      throw std::runtime_error("load_feedback_csv: malformed row at line " +
                               std::to_string(lineno));
    }
  }
  fb.corrections = Eigen::Map<Vec>(corr.data(), static_cast<Eigen::Index>(corr.size()));
  return fb;
}

/// Simulated expert for experiments: flags every injected outlier and returns
/// the uncontaminated value, optionally blurred with noise of variance
/// sigma2_corr for the imperfect-expert mode.
inline ExpertFeedback simulate_expert(const std::vector<Eigen::Index>& injected,
                                      const Eigen::Ref<const Vec>& y_clean, double sigma2_corr,
                                      bool noisy, RngStream* rng = nullptr) {
  ExpertFeedback fb;
  fb.sigma2_corr = sigma2_corr;
  fb.outlier_indices = injected;
  fb.labels.assign(injected.size(), 1);
  fb.corrections.resize(static_cast<Eigen::Index>(injected.size()));
  for (std::size_t j = 0; j < injected.size(); ++j) {
    double v = y_clean[injected[j]];
    if (noisy && rng) v += rng->normal(0.0, std::sqrt(sigma2_corr));
    fb.corrections[static_cast<Eigen::Index>(j)] = v;
  }
  return fb;
}

}  // namespace rcagp
