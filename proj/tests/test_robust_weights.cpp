#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "rcagp/robust_weights.hpp"

using namespace rcagp;

TEST_CASE("soft_threshold quantile rule", "[robust_weights]") {
  // constant residuals
  CHECK(soft_threshold(Vec::Constant(7, 2.0), 0.3) == Catch::Approx(2.0));
  // type-7 linear interpolation on {1..10}, eps = 0.2
  Vec r(10);
  for (int j = 0; j < 10; ++j) r[j] = j + 1.0;
  CHECK(soft_threshold(r, 0.2) == Catch::Approx(8.2).epsilon(1e-12));
  // degenerate all-zero residuals floor
  CHECK(soft_threshold(Vec::Zero(5), 0.2) == Catch::Approx(1e-6));
  // errors
  CHECK_THROWS_AS(soft_threshold(Vec(), 0.2), std::invalid_argument);
  CHECK_THROWS_AS(soft_threshold(Vec::Ones(3), 0.0), std::invalid_argument);
  CHECK_THROWS_AS(soft_threshold(Vec::Ones(3), 1.0), std::invalid_argument);
}

TEST_CASE("weight closed form", "[robust_weights]") {
  CHECK(weight(1.5, 1.5, 0.7, 2.0) == Catch::Approx(0.7));               // y == m
  CHECK(weight(3.0, 1.0, 0.5, 2.0) == Catch::Approx(0.5 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK(weight(1e9, 0.0, 1.0, 1.0) < 1e-8);                               // limit
  // monotone decreasing in |y - m|
  double prev = weight(0.0, 0.0, 1.0, 1.0);
  for (double d : {0.2, 0.5, 1.0, 3.0, 10.0}) {
    const double v = weight(d, 0.0, 1.0, 1.0);
    CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("shrinkage_mean closed form", "[robust_weights]") {
  CHECK(shrinkage_mean(0.4, 0.4, 1.0, 2.0) == Catch::Approx(0.4));  // y == m
  CHECK(shrinkage_mean(0.4, 5.0, 1.0, std::numeric_limits<double>::infinity()) ==
        Catch::Approx(0.4));                                        // c -> inf
  // sigma2 = 1, c = 1, y - m = 1 -> m - 1
  CHECK(shrinkage_mean(2.0, 3.0, 1.0, 1.0) == Catch::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("build_weighted_noise scalar oracle and GP recovery", "[robust_weights]") {
  // n = 1, beta = 1, c = 1, sigma2 = 1, y - m = 1
  RobustConfig cfg;
  cfg.beta = 1.0;
  cfg.c_override = 1.0;
  const WeightedNoise wn =
      build_weighted_noise(Vec::Constant(1, 1.0), Vec::Zero(1), 1.0, cfg);
  CHECK(wn.w[0] == Catch::Approx(0.70710678118).epsilon(1e-9));
  CHECK(wn.jw_diag[0] == Catch::Approx(1.0).epsilon(1e-12));
  CHECK(wn.m_w[0] == Catch::Approx(-1.0).epsilon(1e-12));

  // constant weight w = sigma/sqrt(2) with c = inf gives J_w = I, m_w = m
  const double sigma2 = 0.37;
  const Vec y = Vec::LinSpaced(6, -2.0, 4.0);
  const Vec m = Vec::Constant(6, 0.5);
  const WeightedNoise gp =
      build_weighted_noise(y, m, sigma2, RobustConfig::constant_weight());
  CHECK((gp.jw_diag.array() - 1.0).abs().maxCoeff() < 1e-14);
  CHECK((gp.m_w - m).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((gp.w.array() - std::sqrt(sigma2 / 2.0)).abs().maxCoeff() < 1e-14);
}

TEST_CASE("weights are positive, bounded by beta, exact jw relation", "[robust_weights]") {
  std::mt19937_64 eng(5);
  std::normal_distribution<double> g(0.0, 2.0);
  Vec y(40), m(40);
  for (int j = 0; j < 40; ++j) {
    y[j] = g(eng);
    m[j] = 0.3 * g(eng);
  }
  RobustConfig cfg;
  cfg.beta = 0.9;
  cfg.epsilon = 0.2;
  const double sigma2 = 0.8;
  const WeightedNoise wn = build_weighted_noise(y, m, sigma2, cfg);
  for (int j = 0; j < 40; ++j) {
    CHECK(wn.w[j] > 0.0);
    CHECK(wn.w[j] <= 0.9 + 1e-15);
    CHECK(wn.jw_diag[j] == Catch::Approx(sigma2 / (2.0 * wn.w[j] * wn.w[j])).epsilon(1e-14));
    CHECK(std::isfinite(wn.m_w[j]));
  }
}

TEST_CASE("y w(y)^2 stays bounded: the robustness condition", "[robust_weights]") {
  const double beta = 0.8, c = 2.5;
  // dense grid over a wide range plus a fine sweep around |y| = c
  double grid_max = 0.0;
  auto probe = [&](double y) {
    const double w = weight(y, 0.0, beta, c);
    grid_max = std::max(grid_max, std::abs(y) * w * w);
  };
  for (double e = -6.0; e <= 6.0; e += 0.01) {
    probe(std::pow(10.0, e));
    probe(-std::pow(10.0, e));
  }
  for (double y = 0.9 * c; y <= 1.1 * c; y += 1e-4 * c) probe(y);
  // analytic max beta^2 c / 2 attained at |y - m| = c (zero prior mean)
  CHECK(grid_max == Catch::Approx(beta * beta * c / 2.0).epsilon(1e-6));
  CHECK(grid_max <= beta * beta * c);
}

TEST_CASE("shrinkage correction is odd and bounded", "[robust_weights]") {
  const double sigma2 = 1.3, c = 0.9, m = 0.2;
  for (double d : {0.1, 0.5, 1.0, 4.0, 50.0}) {
    const double up = shrinkage_mean(m, m + d, sigma2, c) - m;
    const double dn = shrinkage_mean(m, m - d, sigma2, c) - m;
    CHECK(up == Catch::Approx(-dn).epsilon(1e-12));
    CHECK(std::abs(up) <= sigma2 / c + 1e-12);
  }
}

TEST_CASE("robust config defaults and validation", "[robust_weights]") {
  // stock defaults: quantile level 0.2, beta resolving to sigma/sqrt(2)
  RobustConfig cfg;
  CHECK(cfg.epsilon == 0.2);
  CHECK(cfg.resolve_beta(2.0) == Catch::Approx(1.0));
  cfg.epsilon = 1.5;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.epsilon = 0.2;
  cfg.beta = -1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
