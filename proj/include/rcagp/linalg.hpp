#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace rcagp {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Cholesky factorization that reports failure through an exception carrying
/// a crude condition estimate (ratio of extreme squared pivot magnitudes).
inline Eigen::LLT<Mat> chol_spd(const Mat& a, const std::string& what) {
  Eigen::LLT<Mat> llt(a);
  if (llt.info() != Eigen::Success) {
    double dmax = 0.0, dmin = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < a.rows(); ++j) {
      dmax = std::max(dmax, a(j, j));
      dmin = std::min(dmin, a(j, j));
    }
    throw std::runtime_error(what + ": matrix not positive definite (diag ratio ~" +
                             std::to_string(dmax / std::max(dmin, 1e-300)) + ")");
  }
  return llt;
}

inline double logdet_from_llt(const Eigen::LLT<Mat>& llt) {
  double ld = 0.0;
  const auto& l = llt.matrixLLT();
  for (Eigen::Index j = 0; j < l.rows(); ++j) ld += std::log(l(j, j));
  return 2.0 * ld;
}

/// Squared Mahalanobis-style norm v' A^-1 v through an existing factorization.
inline double inv_quad(const Eigen::LLT<Mat>& llt, const Vec& v) {
  Vec half = llt.matrixL().solve(v);
  return half.squaredNorm();
}

}  // namespace rcagp
