#pragma once

// Internal (not installed): factorized forward-marginal evaluation shared by
// the mixture free functions and the exact score oracle, which caches one
// prepared set per step index.

#include <vector>

#include <Eigen/Dense>

#include "difflab/mixture.hpp"

namespace difflab::detail {

struct PreparedComponent {
  double log_weight;
  Eigen::VectorXd mean;
  Eigen::LLT<Eigen::MatrixXd> llt;
  double log_det;
};

// Throws std::domain_error("degenerate marginal") on a non-PD covariance.
std::vector<PreparedComponent> prepare(const ForwardMarginal& m);

double log_density(const std::vector<PreparedComponent>& comps, int d,
                   const Eigen::VectorXd& x);
Eigen::VectorXd score(const std::vector<PreparedComponent>& comps,
                      const Eigen::VectorXd& x);
Eigen::MatrixXd score_jacobian(const std::vector<PreparedComponent>& comps,
                               const Eigen::VectorXd& x);

}  // namespace difflab::detail
