#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "difflab/oracle.hpp"
#include "difflab/rng.hpp"
#include "difflab/schedule.hpp"

namespace difflab {

enum class SamplerKind { ddim_simple, ddim_eps, ddpm, accel_ode, accel_sde };
enum class OdeMode { midpoint, reuse };
enum class BoundaryMode { first_order, alpha_ext };

struct SamplerSpec {
  SamplerKind kind = SamplerKind::ddim_eps;
  std::optional<OdeMode> ode_mode;  // present iff kind == accel_ode

  void validate() const;  // throws std::invalid_argument on mode mismatch
};

std::string sampler_name(const SamplerSpec& spec);  // e.g. "accel_ode(reuse)"
std::string to_string(SamplerKind kind);
std::string to_string(OdeMode mode);
std::string to_string(BoundaryMode mode);
SamplerSpec sampler_spec_from_string(const std::string& name);
BoundaryMode boundary_from_string(const std::string& name);
nlohmann::json sampler_spec_to_json(const SamplerSpec& spec);
SamplerSpec sampler_spec_from_json(const nlohmann::json& j);

// Raised when a step produces a non-finite score or hits a degenerate
// coefficient; `step` is the t at which it happened.
class SamplerError : public std::runtime_error {
 public:
  SamplerError(const std::string& what, int step_index)
      : std::runtime_error(what), step(step_index) {}
  int step;
};

/* Per-step coefficients, evaluated in cancellation-free form.
 *
 * ddim_eps_coeff(t) = sqrt(1 - abar_{t-1}) - sqrt(1 - abar_t)/sqrt(alpha_t)
 * accel_ct(t)       = (sqrt(abar_{t-1}) / (abar_t - abar_{t+1})) *
 *                     ( abar_t sqrt(1-abar_{t-1})/sqrt(abar_{t-1}) + arcsin sqrt(abar_{t-1})
 *                     - abar_t sqrt(1-abar_t)/sqrt(abar_t) - arcsin sqrt(abar_t) )
 *
 * Both are differences of nearly equal quantities when beta_t is small; the
 * implementations rewrite them through conjugate identities (and the arcsin
 * subtraction formula) so the leading digits never cancel, and compute
 * abar_{t-1} - abar_t as abar_{t-1} * beta_t.  The naive transcriptions lose
 * ~10 significant digits at early t for T = 256.
 *
 * If `clamped` is non-null it is set when the arcsin argument had to be
 * clamped into [0,1] by more than 1e-12 (rounding guard; see SamplerSpec
 * error contract).
 */
double ddim_eps_coeff(const NoiseSchedule& sched, int t);
double ddim_eps_coeff_raw(double abar_prev, double abar_t);
double accel_ct(const NoiseSchedule& sched, int t, bool* clamped = nullptr);
double accel_ct_raw(double abar_prev, double abar_t, double abar_next, bool* clamped = nullptr);

/* Single reverse-process steps, t -> t-1.  All take the step index t of the
 * state being consumed (so the result is Y_{t-1}).  Preconditions on t per
 * function; a non-finite oracle output raises SamplerError("score blowup at
 * step t"). */

// Y_{t-1} = (Y_t + ((1-alpha_t)/2) s_t(Y_t)) / sqrt(alpha_t)
Eigen::VectorXd ddim_simple_step(const ScoreOracle& s, const NoiseSchedule& sched, int t,
                                 const Eigen::VectorXd& y);

// Y_{t-1} = Y_t/sqrt(alpha_t) + ddim_eps_coeff(t) * eps_t(Y_t)
Eigen::VectorXd ddim_eps_step(const ScoreOracle& s, const NoiseSchedule& sched, int t,
                              const Eigen::VectorXd& y);

// Y_{t-1} = (Y_t + (1-alpha_t) s_t(Y_t) + sqrt(1-alpha_t) Z) / sqrt(alpha_t)
Eigen::VectorXd ddpm_step(const ScoreOracle& s, const NoiseSchedule& sched, int t,
                          const Eigen::VectorXd& y, GaussianStream& rng);
Eigen::VectorXd ddpm_step_with_noise(const ScoreOracle& s, const NoiseSchedule& sched, int t,
                                     const Eigen::VectorXd& y, const Eigen::VectorXd& z);

/* Midpoint (extragradient) second-order ODE step:
 *   y~  = Phi_t(y)      = sqrt(alpha_{t+1}) (y - ((1-alpha_{t+1})/2) s_t(y))
 *   y'  = Psi_t(y, y~)  = (y + ((1-alpha_t)/2) s_t(y)
 *              + ((1-alpha_t)^2/(4(1-alpha_{t+1}))) (s_t(y) - sqrt(alpha_{t+1}) s_{t+1}(y~)))
 *              / sqrt(alpha_t)
 * Two oracle evaluations (s_t(y) shared).  Valid for 2 <= t <= T; t = T uses
 * alpha_{T+1} = alpha_ext.  momentum_scale multiplies the correction term;
 * 0 skips it (and the second evaluation), reproducing ddim_simple_step
 * exactly (regression hook). */
Eigen::VectorXd accel_ode_step_midpoint(const ScoreOracle& s, const NoiseSchedule& sched, int t,
                                        const Eigen::VectorXd& y, double momentum_scale = 1.0);

/* Score-reuse second-order ODE step (one new evaluation per step):
 *   y' = y/sqrt(alpha_t) + ddim_eps_coeff(t) eps_t(y)
 *        + accel_ct(t) (cached_eps_next - eps_t(y))
 * cached_eps_next must be eps_{t+1} evaluated at the previous iterate.
 * Valid for 2 <= t <= T-1; returns eps_t(y) as the next step's cache. */
struct ReuseStepResult {
  Eigen::VectorXd y;
  Eigen::VectorXd eps_t;
  bool arcsin_clamped = false;
};
ReuseStepResult accel_ode_step_reuse(const ScoreOracle& eps, const NoiseSchedule& sched, int t,
                                     const Eigen::VectorXd& y,
                                     const Eigen::VectorXd& cached_eps_next);

/* Extragradient SDE step (two Gaussian draws, order Z then Z+):
 *   y+ = y + sqrt((1-alpha_t)/2) Z
 *   y' = (y+ + (1-alpha_t) s_t(y+) + sqrt((1-alpha_t)/2) Z+) / sqrt(alpha_t)
 */
Eigen::VectorXd accel_sde_step(const ScoreOracle& s, const NoiseSchedule& sched, int t,
                               const Eigen::VectorXd& y, GaussianStream& rng);
Eigen::VectorXd accel_sde_step_with_noise(const ScoreOracle& s, const NoiseSchedule& sched,
                                          int t, const Eigen::VectorXd& y,
                                          const Eigen::VectorXd& z,
                                          const Eigen::VectorXd& z_plus);

struct RunOptions {
  BoundaryMode boundary = BoundaryMode::first_order;
  int threads = 1;
  // Test hook: rows are the Y_T starting points (n_traj x d), bypassing the
  // N(0, I) initialization.  Stochastic draws still come from the seed.
  std::optional<Eigen::MatrixXd> init_override;
  bool collect_diagnostics = false;
};

struct SampleBatch {
  Eigen::MatrixXd y1;               // n_traj x d final points Y_1
  std::uint64_t nfe = 0;            // total oracle evaluations across trajectories
  int clamp_events = 0;             // arcsin clamps beyond tolerance (reuse mode)
  std::vector<double> step_mean_norm;  // mean ||Y_{t-1}|| after the step at t = T-k
  nlohmann::json metadata;
};

/* Runs n_traj reverse trajectories: Y_T ~ N(0, I_d), then t = T..2, emitting
 * Y_1.  Trajectory i draws from the substream derive_stream(seed, {i}), so
 * results are bitwise independent of threads and trajectory order.  reuse
 * mode primes its cache with a first-order eps step at t = T; midpoint mode
 * handles t = T per RunOptions::boundary.  Per-trajectory NFE:
 *   ddim_simple, ddim_eps, ddpm, accel_sde, accel_ode(reuse): T - 1
 *   accel_ode(midpoint): 2(T-1) - 1 first_order, 2(T-1) alpha_ext
 */
SampleBatch run_sampler(const SamplerSpec& spec, const ScoreOracle& oracle, int d, int n_traj,
                        std::uint64_t seed, const RunOptions& opts = {});

// The documented per-trajectory evaluation count for a T..2 sweep.
std::uint64_t nfe_per_trajectory(const SamplerSpec& spec, int T, BoundaryMode boundary);

}  // namespace difflab
