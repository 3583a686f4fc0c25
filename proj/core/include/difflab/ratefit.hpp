#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "difflab/mixture.hpp"
#include "difflab/propagation.hpp"
#include "difflab/samplers.hpp"
#include "difflab/schedule.hpp"

namespace difflab {

struct RateFit {
  std::vector<std::pair<double, double>> points;  // (T, error)
  double slope = 0;
  double intercept = 0;  // of log(error) on log(T)
  double r2 = 0;
};

/* OLS of log(error) on log(T).  Requires >= 3 points, strictly increasing T,
 * errors > 0 (std::invalid_argument otherwise).  r2 = 1 when the residuals
 * vanish (including the all-equal-errors case). */
RateFit fit_rate(const std::vector<std::pair<double, double>>& points);

struct LinearFit {
  double slope = 0;
  double intercept = 0;
  double r2 = 0;
};

// Plain OLS on raw (x, y) pairs; >= 2 points.
LinearFit fit_linear(const std::vector<std::pair<double, double>>& points);

struct StabilityRow {
  double magnitude = 0;  // injected score-error scale (epsilon_score)
  double error = 0;      // TV of the propagated Y_1 law to the target q_1
};

/* Degradation of a single-Gaussian d=1 target under a constant_shift score
 * perturbation of each magnitude, measured exactly: the shift keeps the
 * score affine, so each run is a propagate_affine + tv_gaussian_1d pair.
 * The shift direction is magnitude * perturbation_direction(1, seed), the
 * same vector perturbed_oracle would use.  magnitudes must be sorted
 * ascending and nonnegative; a leading 0 gives the unperturbed baseline. */
std::vector<StabilityRow> stability_sweep(const SamplerSpec& spec,
                                          const GaussianMixture& target,
                                          const NoiseSchedule& sched,
                                          const std::vector<double>& magnitudes,
                                          std::uint64_t direction_seed = 0,
                                          BoundaryMode boundary = BoundaryMode::first_order);

}  // namespace difflab
