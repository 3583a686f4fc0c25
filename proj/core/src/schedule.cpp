#include "difflab/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace difflab {

double NoiseSchedule::abar(int t) const {
  if (t == T + 1) return alpha_bar[static_cast<std::size_t>(T)] * alpha_ext;
  return alpha_bar.at(static_cast<std::size_t>(t));
}

double NoiseSchedule::a(int t) const {
  if (t == T + 1) return alpha_ext;
  if (t < 1) throw std::out_of_range("schedule index out of range");
  return alpha.at(static_cast<std::size_t>(t));
}

namespace {

// alpha/alpha_bar as running products of a filled beta array; rejects beta
// outside (0,1) with the given message.
void derive_alphas(NoiseSchedule& s, const char* overflow_msg) {
  s.alpha.assign(static_cast<std::size_t>(s.T) + 1, 0.0);
  s.alpha_bar.assign(static_cast<std::size_t>(s.T) + 1, 1.0);
  for (int t = 1; t <= s.T; ++t) {
    const double b = s.beta[static_cast<std::size_t>(t)];
    if (!(b > 0.0) || b >= 1.0) throw std::invalid_argument(overflow_msg);
    s.alpha[static_cast<std::size_t>(t)] = 1.0 - b;
    s.alpha_bar[static_cast<std::size_t>(t)] =
        s.alpha_bar[static_cast<std::size_t>(t - 1)] * s.alpha[static_cast<std::size_t>(t)];
  }
  s.alpha_ext = s.alpha[static_cast<std::size_t>(s.T)];
}

}  // namespace

NoiseSchedule build_schedule(const ScheduleParams& params) {
  if (params.T < 2) throw std::invalid_argument("schedule requires T >= 2");
  if (!(params.c0 > 0) || !(params.c1 > 0))
    throw std::invalid_argument("schedule requires c0 > 0 and c1 > 0");

  const int T = params.T;
  NoiseSchedule s;
  s.T = T;
  s.c0 = params.c0;
  s.c1 = params.c1;
  s.beta.assign(static_cast<std::size_t>(T) + 1, 0.0);

  const double rate = params.c1 * std::log(static_cast<double>(T)) / T;
  s.beta[1] = std::pow(static_cast<double>(T), -params.c0);
  double ramp = s.beta[1] * (1.0 + rate);  // beta[1]*(1+rate)^{t-1}
  for (int t = 2; t <= T; ++t) {
    ramp *= (1.0 + rate);  // beta[1]*(1+rate)^t
    s.beta[static_cast<std::size_t>(t)] = rate * std::min(ramp, 1.0);
  }
  derive_alphas(s, "schedule overflow");
  return s;
}

bool ScheduleReport::all_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const PropertyCheck& c) { return c.pass; });
}

ScheduleReport validate_schedule(const NoiseSchedule& s, const ScheduleParams& params) {
  ScheduleReport report;
  const int T = s.T;
  const double rate = params.c1 * std::log(static_cast<double>(params.T)) / params.T;
  const double ratio_bound = 4.0 * rate;
  const auto at = [](const std::vector<double>& v, int t) {
    return v[static_cast<std::size_t>(t)];
  };

  {
    double margin = std::numeric_limits<double>::infinity();
    for (int t = 1; t <= T; ++t)
      margin = std::min(margin, std::min(at(s.beta, t), 1.0 - at(s.beta, t)));
    report.checks.push_back({"beta_in_range", margin > 0.0, margin});
  }
  {
    double margin = std::numeric_limits<double>::infinity();
    for (int t = 1; t <= T; ++t)
      margin = std::min(margin, at(s.alpha_bar, t - 1) - at(s.alpha_bar, t));
    report.checks.push_back({"alpha_bar_decreasing", margin > 0.0, margin});
  }
  {
    // ramp segment nondecreasing; once the clamp value is reached, constant
    double margin = (T >= 3) ? std::numeric_limits<double>::infinity() : 0.0;
    bool clamped = at(s.beta, std::min(2, T)) >= rate;
    for (int t = 3; t <= T; ++t) {
      const double step = at(s.beta, t) - at(s.beta, t - 1);
      margin = std::min(margin, clamped ? -std::abs(step) : step);
      clamped = clamped || at(s.beta, t) >= rate;
    }
    report.checks.push_back({"two_phase_shape", margin >= 0.0, margin});
  }
  {
    double margin = std::numeric_limits<double>::infinity();
    for (int t = 1; t <= T; ++t) margin = std::min(margin, at(s.alpha, t) - 0.5);
    report.checks.push_back({"alpha_ge_half", margin >= 0.0, margin});
  }
  {
    double margin = std::numeric_limits<double>::infinity();
    for (int t = 2; t <= T; ++t) {
      const double ratio = (1.0 - at(s.alpha, t)) / (1.0 - at(s.alpha_bar, t - 1));
      margin = std::min(margin, ratio_bound - ratio);
    }
    report.checks.push_back({"step_ratio_bound", margin >= 0.0, margin});
  }
  {
    double lower = std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
    for (int t = 2; t <= T; ++t) {
      const double ratio = (1.0 - at(s.alpha_bar, t)) / (1.0 - at(s.alpha_bar, t - 1));
      lower = std::min(lower, ratio - 1.0);
      upper = std::min(upper, 1.0 + ratio_bound - ratio);
    }
    report.checks.push_back({"abar_ratio_lower", lower >= 0.0, lower});
    report.checks.push_back({"abar_ratio_upper", upper >= 0.0, upper});
  }
  report.alpha_bar_T = s.alpha_bar[static_cast<std::size_t>(T)];
  return report;
}

nlohmann::json schedule_to_json(const NoiseSchedule& s) {
  nlohmann::json j;
  j["T"] = s.T;
  j["c0"] = s.c0;
  j["c1"] = s.c1;
  j["beta"] = std::vector<double>(s.beta.begin() + 1, s.beta.end());
  return j;
}

NoiseSchedule schedule_from_json(const nlohmann::json& j) {
  NoiseSchedule s;
  s.T = j.at("T").get<int>();
  s.c0 = j.at("c0").get<double>();
  s.c1 = j.at("c1").get<double>();
  if (s.T < 2) throw std::invalid_argument("schedule JSON: T must be >= 2");
  const auto beta = j.at("beta").get<std::vector<double>>();
  if (static_cast<int>(beta.size()) != s.T)
    throw std::invalid_argument("schedule JSON: beta length must equal T");
  s.beta.assign(1, 0.0);
  s.beta.insert(s.beta.end(), beta.begin(), beta.end());
  derive_alphas(s, "schedule JSON: beta out of (0,1)");
  return s;
}

}  // namespace difflab
