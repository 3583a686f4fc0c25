#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "difflab/propagation.hpp"

namespace difflab {

/* TV(a, b) = (1/2) integral |phi_a - phi_b| for d = 1 Gaussian laws, by
 * adaptive Gauss-Kronrod quadrature over [min mean - 12 s, max mean + 12 s]
 * with s = sqrt((v_a + v_b)/2); absolute tolerance 1e-10.  Throws
 * std::domain_error on a nonpositive variance and std::invalid_argument for
 * d != 1. */
double tv_gaussian_1d(const AffineLaw& a, const AffineLaw& b);

// Closed-form KL(a || b) for Gaussian laws of any (equal) dimension.
// Returns +inf when a.cov is singular; throws std::domain_error when b.cov
// is not positive definite.
double kl_gaussian(const AffineLaw& a, const AffineLaw& b);

/* Average over n_directions random unit directions of the exact 1D W1
 * distance between the projected empirical distributions (quantile-function
 * coupling; sample counts may differ).  d = 1 uses the single identity
 * direction.  Rows are samples.  Requires >= 100 samples per set. */
double sliced_w1(const Eigen::MatrixXd& samples_a, const Eigen::MatrixXd& samples_b,
                 int n_directions, std::uint64_t seed);

// (1/2) sum |p_a - p_b| over a shared bounding box, d <= 2, bins >= 16 per
// axis.
double histogram_tv(const Eigen::MatrixXd& samples_a, const Eigen::MatrixXd& samples_b,
                    int bins);

}  // namespace difflab
