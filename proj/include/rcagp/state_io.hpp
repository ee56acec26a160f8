#pragma once

#include <json.hpp>

#include "rcagp/posterior.hpp"

namespace rcagp {

/// Reproducibility export of a fitted state.
inline nlohmann::json export_state_json(const PosteriorState& st) {
  nlohmann::json j;
  j["model"] = model_name(st.model);
  j["theta"] = {
      {"kernel", st.theta.kernel.kind == KernelKind::RBF ? "rbf" : "matern52"},
      {"lengthscale", std::vector<double>(st.theta.kernel.lengthscale.begin(),
                                          st.theta.kernel.lengthscale.end())},
      {"outputscale", st.theta.kernel.outputscale},
      {"sigma2", st.theta.sigma2},
  };
  j["c"] = std::isfinite(st.weighted.c) ? nlohmann::json(st.weighted.c) : nlohmann::json("inf");
  j["beta"] = st.weighted.beta;
  switch (st.projected ? st.actions.kind : ActionKind::Dense) {
    case ActionKind::InducingKernel: {
      j["actions"]["kind"] = "inducing";
      std::vector<std::vector<double>> z;
      for (Eigen::Index r = 0; r < st.actions.z.rows(); ++r)
        z.emplace_back(st.actions.z.row(r).begin(), st.actions.z.row(r).end());
      j["actions"]["values"] = z;
      break;
    }
    case ActionKind::SparseBlock:
      j["actions"]["kind"] = "sparse_block";
      j["actions"]["columns"] = st.actions.i;
      j["actions"]["values"] =
          std::vector<double>(st.actions.values.begin(), st.actions.values.end());
      break;
    case ActionKind::Dense: {
      j["actions"]["kind"] = st.projected ? "dense" : "full";
      if (st.projected) {
        std::vector<std::vector<double>> m;
        for (Eigen::Index r = 0; r < st.actions.dense.rows(); ++r)
          m.emplace_back(st.actions.dense.row(r).begin(), st.actions.dense.row(r).end());
        j["actions"]["values"] = m;
      }
      break;
    }
  }
  j["v_tilde"] = std::vector<double>(st.v_tilde.begin(), st.v_tilde.end());
  std::vector<std::vector<double>> xt;
  for (Eigen::Index r = 0; r < st.x_train.rows(); ++r)
    xt.emplace_back(st.x_train.row(r).begin(), st.x_train.row(r).end());
  j["X_train"] = xt;
  return j;
}

}  // namespace rcagp
