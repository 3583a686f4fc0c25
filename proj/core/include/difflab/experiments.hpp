#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "difflab/mixture.hpp"
#include "difflab/ratefit.hpp"
#include "difflab/samplers.hpp"
#include "difflab/schedule.hpp"

namespace difflab {

/* One experiment = one JSON document; seed is mandatory (reruns must be
 * reproducible, so there is no wall-clock default).
 *
 * {
 *   "schema_version": 1,
 *   "target": "std_normal" | {inline mixture},
 *   "schedule": {"c0": 2, "c1": 4, "T": 64},     T required by sample/stability
 *   "samplers": [{"kind": "ddim_eps"}, {"kind": "accel_ode", "ode_mode": "reuse"}],
 *   "t_grid": [16, 32, 64, 128, 256, 512],       rate only (this default)
 *   "n_traj": 200000,
 *   "n_directions": 64,
 *   "seed": 42,
 *   "boundary": "first_order" | "alpha_ext",
 *   "magnitudes": [0, 1e-3, 1e-2, 1e-1],          stability only
 *   "metric": "tv"                                optional fit-metric override
 * }
 */
struct ExperimentConfig {
  GaussianMixture target;
  std::string target_name;  // preset name, or "inline" for an embedded mixture
  double c0 = 2.0;
  double c1 = 4.0;
  int T = 0;  // 0 = unset
  std::vector<int> t_grid{16, 32, 64, 128, 256, 512};
  std::vector<SamplerSpec> samplers;
  int n_traj = 200000;
  int n_directions = 64;
  std::uint64_t seed = 0;
  BoundaryMode boundary = BoundaryMode::first_order;
  std::vector<double> magnitudes;
  std::string metric;  // "", "tv", "kl", "sliced_w1"
};

ExperimentConfig experiment_config_from_json(const nlohmann::json& j);

struct RateRow {
  int T = 0;
  std::string sampler;
  std::string mode;    // ode_mode, or "-" for samplers without one
  std::string metric;  // "tv", "kl", "sliced_w1"
  double value = 0;
  std::uint64_t nfe = 0;  // per-trajectory oracle evaluations
  std::uint64_t seed = 0;
};

struct ExcludedPoint {
  std::string sampler;
  int T = 0;
  double value = 0;
  std::string reason;
};

struct RateStudyResult {
  bool mc_path = false;     // single-Gaussian targets use exact propagation
  std::string fit_metric;   // metric the per-sampler fits were made on
  std::vector<RateRow> rows;
  std::vector<std::pair<std::string, RateFit>> fits;
  std::vector<ExcludedPoint> excluded;  // errors below the 1e-13 float floor
};

/* Runs every configured sampler over the T grid.  Single-Gaussian targets
 * take the exact path (propagate_affine; tv_gaussian_1d when d = 1 plus
 * kl_gaussian rows, kl alone otherwise); mixtures take the Monte Carlo path
 * (run_sampler + sliced_w1 against a per-T reference sample shared by all
 * samplers, cell seeds derive_stream(seed, {fnv1a64(sampler), T})).  Exact
 * rows report the formula NFE (exact propagation makes no oracle calls);
 * MC rows report the measured count / n_traj, which must match it. */
RateStudyResult run_rate_study(const ExperimentConfig& cfg, int threads = 1);

nlohmann::json rate_study_to_json(const RateStudyResult& result);

}  // namespace difflab
