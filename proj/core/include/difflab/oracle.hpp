#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <utility>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "difflab/mixture.hpp"
#include "difflab/schedule.hpp"

namespace difflab {

/* Uniform score-evaluation interface consumed by the samplers.
 *
 * evaluate(t, x) returns s_t(x); the noise-prediction form
 * eps_t(x) = -sqrt(1 - abar_t) s_t(x) is derived here, non-virtually, so the
 * conversion cannot drift between implementations.  Valid step indices are
 * 1..T+1; t = T+1 is the boundary extension abar_{T+1} = abar_T * alpha_ext
 * used by the accelerated ODE step at t = T.
 *
 * Implementations are immutable and safe to share across threads (the call
 * counter in the counting wrapper is atomic).
 */
class ScoreOracle {
 public:
  virtual ~ScoreOracle() = default;

  virtual Eigen::VectorXd evaluate(int t, const Eigen::VectorXd& x) const = 0;
  Eigen::VectorXd evaluate_eps(int t, const Eigen::VectorXd& x) const;

  virtual int dim() const = 0;
  virtual const NoiseSchedule& schedule() const = 0;
  int steps() const { return schedule().T; }

 protected:
  // Throws std::out_of_range unless 1 <= t <= T+1.
  void check_step(int t) const;
};

std::shared_ptr<ScoreOracle> exact_oracle(const GaussianMixture& mix,
                                          const NoiseSchedule& schedule);

enum class PerturbationMode { constant_shift, smooth_field };

/* Deterministic score-error injection.  constant_shift adds magnitude * u
 * for a fixed seed-derived unit vector u, so the realized RMS error over any
 * q_t equals magnitude exactly.  smooth_field adds
 * magnitude * sin(<w, x>) * u with a fixed w = 3 * (unit vector); since
 * E sin^2 <= 1 the realized RMS is at most magnitude (roughly
 * magnitude/sqrt(2) once <w, x> spans a few periods; measure with
 * empirical_rms_error below). */
struct PerturbationSpec {
  double magnitude = 0.0;  // >= 0, finite
  PerturbationMode mode = PerturbationMode::constant_shift;
  std::uint64_t direction_seed = 0;
};

std::shared_ptr<ScoreOracle> perturbed_oracle(std::shared_ptr<const ScoreOracle> base,
                                              const PerturbationSpec& spec);

// The unit direction u that perturbed_oracle(seed) uses; exposed so exact
// affine propagation can inject the identical constant shift.
Eigen::VectorXd perturbation_direction(int d, std::uint64_t direction_seed);

class NfeCounter {
 public:
  std::uint64_t count() const { return count_.load(std::memory_order_relaxed); }
  void reset() { count_.store(0, std::memory_order_relaxed); }
  void increment() { count_.fetch_add(1, std::memory_order_relaxed); }

 private:
  std::atomic<std::uint64_t> count_{0};
};

std::pair<std::shared_ptr<ScoreOracle>, std::shared_ptr<NfeCounter>> counting_oracle(
    std::shared_ptr<const ScoreOracle> base);

// Wraps an arbitrary score function (test and diagnostic hook; fn must be
// pure and thread-safe).
std::shared_ptr<ScoreOracle> callable_oracle(
    const NoiseSchedule& schedule, int d,
    std::function<Eigen::VectorXd(int, const Eigen::VectorXd&)> fn);

// Root-mean-square of ||a.evaluate(t, x) - b.evaluate(t, x)|| over n draws
// x ~ q_t of mix; the measured counterpart of PerturbationSpec.magnitude.
double empirical_rms_error(const ScoreOracle& a, const ScoreOracle& b,
                           const GaussianMixture& mix, int t, int n, std::uint64_t seed);

nlohmann::json perturbation_to_json(const PerturbationSpec& spec);
PerturbationSpec perturbation_from_json(const nlohmann::json& j);

}  // namespace difflab
