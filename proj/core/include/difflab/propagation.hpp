#pragma once

#include <Eigen/Dense>

#include "difflab/mixture.hpp"
#include "difflab/samplers.hpp"
#include "difflab/schedule.hpp"

namespace difflab {

// Gaussian law of an iterate; cov is kept symmetric with eigenvalues
// clamped at 0 (tolerance 1e-12 below zero).
struct AffineLaw {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

// Symmetrizes and clamps; throws std::invalid_argument if an eigenvalue is
// below -1e-12 (the law is not a covariance).
AffineLaw make_affine_law(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov);

// The exact forward marginal q_t of a single-Gaussian target as an
// AffineLaw: N(sqrt(abar) mu, abar Sigma + (1-abar) I).
AffineLaw gaussian_marginal_law(const GaussianMixture& target, double abar);

struct PropagateOptions {
  BoundaryMode boundary = BoundaryMode::first_order;
  // Constant vector added to every score evaluation (the constant_shift
  // perturbation, which keeps the score affine).  Empty = no shift.
  Eigen::VectorXd score_shift;
  // Test hook: apply at most this many steps of the T..2 sweep (-1 = all).
  // 0 returns the N(0, I) initialization untouched.
  int max_steps = -1;
};

/* Exact law of Y_1 for a single-Gaussian target, for which every sampler
 * update is affine in (Y_t, noise):
 *   s_t(x) = G_t (x - m_t) + e,  G_t = -(abar_t Sigma + (1-abar_t) I)^{-1},
 *   m_t = sqrt(abar_t) mu.
 * Deterministic kinds are composed as a single affine map of Y_T (the reuse
 * cache is itself an affine map, tracked alongside); stochastic kinds
 * propagate (mean, cov) directly, adding each step's exact noise covariance:
 *   ddpm:      A cov A^T + ((1-alpha)/alpha) I,          A = (I + (1-alpha) G)/sqrt(alpha)
 *   accel_sde: A (cov + ((1-alpha)/2) I) A^T + ((1-alpha)/(2 alpha)) I
 * Boundary handling at t = T mirrors run_sampler.
 *
 * Throws std::invalid_argument("propagation requires affine score") for
 * multi-component targets and std::domain_error for a non-PD covariance.
 */
AffineLaw propagate_affine(const SamplerSpec& spec, const GaussianMixture& target,
                           const NoiseSchedule& sched, const PropagateOptions& opts = {});

}  // namespace difflab
