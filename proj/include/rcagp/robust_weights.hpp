#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "rcagp/linalg.hpp"

namespace rcagp {

/// Knobs of the robust update. An unset beta resolves to sigma/sqrt(2) at
/// build time, which makes c -> inf recover the non-robust model exactly;
/// the CLI paper-defaults preset pins beta = 1.0 instead.
struct RobustConfig {
  std::optional<double> beta;       // learning rate; default sigma/sqrt(2)
  double epsilon = 0.2;             // quantile level for the soft threshold
  std::optional<double> c_override; // bypass the quantile rule (inf allowed)

  double resolve_beta(double sigma2) const {
    const double b = beta ? *beta : std::sqrt(sigma2 / 2.0);
    if (!(b > 0.0)) throw std::invalid_argument("RobustConfig: beta must be positive");
    return b;
  }

  void validate() const {
    if (!(epsilon > 0.0 && epsilon < 1.0))
      throw std::invalid_argument("RobustConfig: epsilon must lie in (0,1)");
    if (beta && !(*beta > 0.0))
      throw std::invalid_argument("RobustConfig: beta must be positive");
  }

  /// Constant-weight configuration: w == sigma/sqrt(2), J_w = I, m_w = m.
  static RobustConfig constant_weight() {
    RobustConfig cfg;
    cfg.c_override = std::numeric_limits<double>::infinity();
    return cfg;
  }
};

/// Per-point robustness state frozen at fit time.
struct WeightedNoise {
  Vec w;        // weights, each in (0, beta]
  Vec jw_diag;  // sigma^2 / (2 w^2)
  Vec m_w;      // shrinkage mean
  double c = 0.0;
  double beta = 0.0;

  bool constant() const { return !std::isfinite(c); }
};

/// Empirical (1-eps)-quantile of absolute residuals, sorted-order linear
/// interpolation (type 7). Floored at 1e-6 so degenerate residuals cannot
/// produce a zero threshold.
inline double soft_threshold(const Eigen::Ref<const Vec>& abs_residuals, double epsilon) {
  if (abs_residuals.size() == 0) throw std::invalid_argument("soft_threshold: empty residuals");
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw std::invalid_argument("soft_threshold: epsilon must lie in (0,1)");
  std::vector<double> v(abs_residuals.data(), abs_residuals.data() + abs_residuals.size());
  std::sort(v.begin(), v.end());
  const double q = 1.0 - epsilon;
  const double h = (static_cast<double>(v.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const double frac = h - static_cast<double>(lo);
  const double val = lo + 1 < v.size() ? v[lo] + frac * (v[lo + 1] - v[lo]) : v[lo];
  return std::max(val, 1e-6);
}

/// w(x, y) = beta (1 + (y - m)^2 / c^2)^(-1/2). Monotone decreasing in |y - m|.
inline double weight(double y, double m_x, double beta, double c) {
  if (!std::isfinite(c)) return beta;
  const double t = (y - m_x) / c;
  return beta / std::sqrt(1.0 + t * t);
}

/// m_w = m + sigma^2 d/dy log w^2, closed form for the weight above
/// (beta cancels): m - 2 sigma^2 (y - m) / (c^2 + (y - m)^2).
inline double shrinkage_mean(double m_x, double y, double sigma2, double c) {
  if (!std::isfinite(c)) return m_x;
  const double d = y - m_x;
  return m_x - 2.0 * sigma2 * d / (c * c + d * d);
}

inline WeightedNoise build_weighted_noise(const Eigen::Ref<const Vec>& y,
                                          const Eigen::Ref<const Vec>& m, double sigma2,
                                          const RobustConfig& cfg) {
  if (y.size() != m.size())
    throw std::invalid_argument("build_weighted_noise: length mismatch");
  cfg.validate();
  WeightedNoise out;
  out.beta = cfg.resolve_beta(sigma2);
  out.c = cfg.c_override ? *cfg.c_override
                         : soft_threshold((y - m).cwiseAbs(), cfg.epsilon);
  const Eigen::Index n = y.size();
  out.w.resize(n);
  out.jw_diag.resize(n);
  out.m_w.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    out.w[j] = weight(y[j], m[j], out.beta, out.c);
    out.jw_diag[j] = sigma2 / (2.0 * out.w[j] * out.w[j]);
    out.m_w[j] = shrinkage_mean(m[j], y[j], sigma2, out.c);
  }
  return out;
}

}  // namespace rcagp
