#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace difflab {

struct ScheduleParams {
  int T = 0;      // number of steps, >= 2
  double c0 = 0;  // initial-step exponent, > 0
  double c1 = 0;  // growth constant, > 0
};

/* Two-phase learning-rate schedule.
 *
 *   beta[1] = T^{-c0}
 *   beta[t] = (c1 log T / T) * min{ beta[1] * (1 + c1 log T / T)^t , 1 }   (t > 1)
 *
 * Natural logarithm throughout.  beta ramps geometrically until the min
 * clamp activates, then stays constant at c1 log T / T.  All arrays are
 * 1-indexed with slot 0 unused except alpha_bar[0] = 1; alpha_bar[t] is the
 * running product of alpha[1..t], so alpha_bar[t] == alpha_bar[t-1]*alpha[t]
 * holds exactly as stored.
 */
struct NoiseSchedule {
  int T = 0;
  double c0 = 0;
  double c1 = 0;
  std::vector<double> beta;       // [0] unused, valid 1..T, each in (0,1)
  std::vector<double> alpha;      // alpha[t] = 1 - beta[t]
  std::vector<double> alpha_bar;  // [0] = 1, strictly decreasing
  double alpha_ext = 1.0;         // alpha_{T+1} extension := alpha[T]

  // alpha_bar with the T+1 extension; t in 0..T+1
  double abar(int t) const;
  // alpha with the T+1 extension; t in 1..T+1
  double a(int t) const;
  double b(int t) const { return beta.at(static_cast<std::size_t>(t)); }
};

// Throws std::invalid_argument on bad params or if any beta[t] >= 1
// ("schedule overflow"; raise T or lower c1).
NoiseSchedule build_schedule(const ScheduleParams& params);

struct PropertyCheck {
  std::string name;
  bool pass = false;
  double margin = 0;  // distance to the bound; negative iff the check fails
};

struct ScheduleReport {
  std::vector<PropertyCheck> checks;
  double alpha_bar_T = 0;  // reported, not asserted (the proof-side exponent is asymptotic)
  bool all_pass() const;
};

/* Pure report of the schedule properties:
 *   - beta in (0,1), alpha_bar strictly decreasing
 *   - two-phase shape (nondecreasing ramp, constant after the clamp)
 *   - alpha_t >= 1/2
 *   - (1 - alpha_t)/(1 - alpha_bar_{t-1}) <= 4 c1 log T / T          (2 <= t <= T)
 *   - 1 <= (1 - alpha_bar_t)/(1 - alpha_bar_{t-1}) <= 1 + 4 c1 log T / T
 * Works on arbitrary (including hand-built) schedules; nothing throws.
 */
ScheduleReport validate_schedule(const NoiseSchedule& s, const ScheduleParams& params);

// JSON snapshot {"T","c0","c1","beta"}; from_json rebuilds alpha and
// alpha_bar from beta so a round trip reproduces the schedule bit-for-bit.
nlohmann::json schedule_to_json(const NoiseSchedule& s);
NoiseSchedule schedule_from_json(const nlohmann::json& j);

}  // namespace difflab
