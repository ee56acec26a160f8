#pragma once

#include <cmath>

#include "rcagp/kernels.hpp"
#include "rcagp/robust_weights.hpp"

namespace rcagp {

/// Model hyperparameters. Positivity of kernel scales and the noise variance
/// is enforced by optimizing their logs; the robustness knobs ride along
/// unoptimized (c comes from the quantile rule, beta from the config).
struct Hyperparams {
  KernelSpec kernel;
  double sigma2 = 0.1;
  RobustConfig robust;

  Eigen::Index unconstrained_dim() const { return kernel.lengthscale.size() + 2; }

  Vec to_unconstrained() const {
    Vec u(unconstrained_dim());
    for (Eigen::Index j = 0; j < kernel.lengthscale.size(); ++j)
      u[j] = std::log(kernel.lengthscale[j]);
    u[kernel.lengthscale.size()] = std::log(kernel.outputscale);
    u[kernel.lengthscale.size() + 1] = std::log(sigma2);
    return u;
  }

  Hyperparams with_unconstrained(const Eigen::Ref<const Vec>& u) const {
    Hyperparams h = *this;
    for (Eigen::Index j = 0; j < kernel.lengthscale.size(); ++j)
      h.kernel.lengthscale[j] = std::exp(u[j]);
    h.kernel.outputscale = std::exp(u[kernel.lengthscale.size()]);
    h.sigma2 = std::exp(u[kernel.lengthscale.size() + 1]);
    return h;
  }

  void validate() const {
    kernel.validate();
    if (!(sigma2 > 0.0)) throw std::invalid_argument("Hyperparams: sigma2 must be positive");
    robust.validate();
  }
};

}  // namespace rcagp
