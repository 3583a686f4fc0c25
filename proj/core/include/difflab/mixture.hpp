#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "difflab/schedule.hpp"

namespace difflab {

/* Gaussian-mixture target distribution (the data law the reverse process
 * should reproduce).  Restricted by validation to d <= 8 and <= 16
 * components so closed-form scores stay cheap and quadrature-based metrics
 * stay feasible.  Point-mass components (cov = 0) are permitted; every
 * marginal operation then requires abar < 1 so the smoothed covariance
 * stays positive definite. */
struct GaussianMixture {
  struct Component {
    double weight = 0;
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;  // symmetric PSD
  };

  int d = 0;
  std::vector<Component> components;

  // Throws std::invalid_argument if weights do not sum to 1 (1e-12), any
  // covariance is asymmetric or has an eigenvalue < -1e-12, or the d /
  // component-count limits are exceeded.
  void validate() const;
};

// Built-in presets: "std_normal" (d=1 N(0,1)), "bimodal_1d" (equal-weight
// modes at +-2, sigma = 0.25), "grid4_2d" (equal-weight 2x2 grid at
// (+-1.5, +-1.5), cov 0.25 I), "shifted_1d" (single N(1.5, 0.25)).
GaussianMixture preset_mixture(const std::string& name);
std::vector<std::string> preset_names();

/* Forward marginal at signal fraction abar: component k becomes
 * N(sqrt(abar) mu_k, abar Sigma_k + (1 - abar) I).  Weights unchanged. */
struct ForwardMarginal {
  GaussianMixture mix;  // transformed components
  double abar = 1.0;
};

ForwardMarginal forward_marginal(const GaussianMixture& base, double abar);

// log q(x) via log-sum-exp over component Gaussians.  Throws
// std::domain_error("degenerate marginal") if any component covariance is
// not positive definite.
double log_density(const ForwardMarginal& m, const Eigen::VectorXd& x);

// Closed-form score grad_x log q(x) via component responsibilities.
Eigen::VectorXd exact_score(const ForwardMarginal& m, const Eigen::VectorXd& x);

// Closed-form (symmetric) Jacobian of exact_score.
Eigen::MatrixXd exact_score_jacobian(const ForwardMarginal& m, const Eigen::VectorXd& x);

// n i.i.d. draws of sqrt(abar) X0 + sqrt(1-abar) W, one per row;
// deterministic function of seed.
Eigen::MatrixXd sample_forward(const GaussianMixture& mix, double abar, int n,
                               std::uint64_t seed);

/* Monte Carlo cross-check of the score's conditional-expectation identity
 *     s(x) = -E[x - sqrt(abar) X0 | X_t = x] / (1 - abar)
 * via self-normalized importance sampling: X0 ~ p_data weighted by the
 * Gaussian kernel exp(-||x - sqrt(abar) x0||^2 / (2 (1-abar))). */
struct MmseResult {
  Eigen::VectorXd analytic;
  Eigen::VectorXd mc;
  double rel_err = 0;
  double ess = 0;            // effective sample size 1 / sum w_i^2
  bool low_ess_warning = false;  // set when ess < 100
};

MmseResult mmse_score_check(const GaussianMixture& mix, const NoiseSchedule& sched, int t,
                            const Eigen::VectorXd& x, int n, std::uint64_t seed);

// JSON schema {"d":..., "components":[{"weight":..,"mean":[..],"cov":[[..]]}]}
nlohmann::json mixture_to_json(const GaussianMixture& mix);
GaussianMixture mixture_from_json(const nlohmann::json& j);

}  // namespace difflab
