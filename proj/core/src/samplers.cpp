#include "difflab/samplers.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace difflab {

namespace {

void check_step_range(int t, int lo, int hi, const char* what) {
  if (t < lo || t > hi)
    throw std::out_of_range(std::string(what) + ": step " + std::to_string(t) + " outside " +
                            std::to_string(lo) + ".." + std::to_string(hi));
}

void check_finite(const Eigen::VectorXd& s, int t) {
  if (!s.allFinite()) throw SamplerError("score blowup at step " + std::to_string(t), t);
}

/* coeff = -(b - a) / (sqrt(a) (sqrt(a(1-b)) + sqrt(b(1-a)))), the conjugate
 * rewrite of sqrt(1-b) - sqrt(1-a)/sqrt(a/b); delta is b - a, passed in as
 * abar_{t-1} * beta_t by the schedule overload so no digits cancel. */
double eps_coeff_core(double b, double a, double delta) {
  if (delta == 0.0) return 0.0;
  const double denom = std::sqrt(a) * (std::sqrt(a * (1.0 - b)) + std::sqrt(b * (1.0 - a)));
  return -delta / denom;
}

/* C_t = sqrt(b) (asin(arg) - a delta / (a sqrt(b(1-b)) + b sqrt(a(1-a)))) / denom_delta
 * with arg = delta / (sqrt(b(1-a)) + sqrt(a(1-b))), delta = b - a,
 * denom_delta = a - abar_{t+1}.  The asin difference is folded with the
 * subtraction identity asin x - asin y = asin(x sqrt(1-y^2) - y sqrt(1-x^2))
 * (valid here: both arguments in [0,1]), then rationalized. */
double accel_ct_core(double b, double a, double delta, double denom_delta, bool* clamped) {
  double arg = delta / (std::sqrt(b * (1.0 - a)) + std::sqrt(a * (1.0 - b)));
  const double excess = std::max(arg - 1.0, -arg);
  if (excess > 0.0) {
    arg = std::clamp(arg, 0.0, 1.0);
    if (clamped && excess > 1e-12) *clamped = true;
  }
  const double term2 =
      a * delta / (a * std::sqrt(b * (1.0 - b)) + b * std::sqrt(a * (1.0 - a)));
  return std::sqrt(b) * (std::asin(arg) - term2) / denom_delta;
}

}  // namespace

void SamplerSpec::validate() const {
  if ((kind == SamplerKind::accel_ode) != ode_mode.has_value())
    throw std::invalid_argument("ode_mode must be present iff kind is accel_ode");
}

std::string to_string(SamplerKind kind) {
  switch (kind) {
    case SamplerKind::ddim_simple: return "ddim_simple";
    case SamplerKind::ddim_eps: return "ddim_eps";
    case SamplerKind::ddpm: return "ddpm";
    case SamplerKind::accel_ode: return "accel_ode";
    case SamplerKind::accel_sde: return "accel_sde";
  }
  return "?";
}

std::string to_string(OdeMode mode) {
  return mode == OdeMode::midpoint ? "midpoint" : "reuse";
}

std::string to_string(BoundaryMode mode) {
  return mode == BoundaryMode::first_order ? "first_order" : "alpha_ext";
}

std::string sampler_name(const SamplerSpec& spec) {
  spec.validate();
  if (spec.kind == SamplerKind::accel_ode)
    return "accel_ode(" + to_string(*spec.ode_mode) + ")";
  return to_string(spec.kind);
}

SamplerSpec sampler_spec_from_string(const std::string& name) {
  SamplerSpec spec;
  if (name == "accel_ode(midpoint)") {
    spec.kind = SamplerKind::accel_ode;
    spec.ode_mode = OdeMode::midpoint;
  } else if (name == "accel_ode(reuse)" || name == "accel_ode") {
    spec.kind = SamplerKind::accel_ode;
    spec.ode_mode = OdeMode::reuse;
  } else if (name == "ddim_simple") {
    spec.kind = SamplerKind::ddim_simple;
  } else if (name == "ddim_eps") {
    spec.kind = SamplerKind::ddim_eps;
  } else if (name == "ddpm") {
    spec.kind = SamplerKind::ddpm;
  } else if (name == "accel_sde") {
    spec.kind = SamplerKind::accel_sde;
  } else {
    throw std::invalid_argument("unknown sampler: " + name);
  }
  return spec;
}

BoundaryMode boundary_from_string(const std::string& name) {
  if (name == "first_order") return BoundaryMode::first_order;
  if (name == "alpha_ext") return BoundaryMode::alpha_ext;
  throw std::invalid_argument("unknown boundary mode: " + name);
}

nlohmann::json sampler_spec_to_json(const SamplerSpec& spec) {
  spec.validate();
  nlohmann::json j{{"kind", to_string(spec.kind)}};
  if (spec.ode_mode) j["ode_mode"] = to_string(*spec.ode_mode);
  return j;
}

SamplerSpec sampler_spec_from_json(const nlohmann::json& j) {
  if (j.is_string()) return sampler_spec_from_string(j.get<std::string>());
  SamplerSpec spec;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "ddim_simple") spec.kind = SamplerKind::ddim_simple;
  else if (kind == "ddim_eps") spec.kind = SamplerKind::ddim_eps;
  else if (kind == "ddpm") spec.kind = SamplerKind::ddpm;
  else if (kind == "accel_ode") spec.kind = SamplerKind::accel_ode;
  else if (kind == "accel_sde") spec.kind = SamplerKind::accel_sde;
  else throw std::invalid_argument("unknown sampler kind: " + kind);
  if (j.contains("ode_mode")) {
    const std::string mode = j.at("ode_mode").get<std::string>();
    if (mode == "midpoint") spec.ode_mode = OdeMode::midpoint;
    else if (mode == "reuse") spec.ode_mode = OdeMode::reuse;
    else throw std::invalid_argument("unknown ode_mode: " + mode);
  }
  spec.validate();
  return spec;
}

double ddim_eps_coeff(const NoiseSchedule& sched, int t) {
  check_step_range(t, 1, sched.T, "ddim_eps_coeff");
  const double b = sched.abar(t - 1);
  return eps_coeff_core(b, sched.abar(t), b * sched.b(t));
}

double ddim_eps_coeff_raw(double abar_prev, double abar_t) {
  return eps_coeff_core(abar_prev, abar_t, abar_prev - abar_t);
}

double accel_ct(const NoiseSchedule& sched, int t, bool* clamped) {
  check_step_range(t, 2, sched.T - 1, "accel_ct");
  const double b = sched.abar(t - 1);
  const double a = sched.abar(t);
  return accel_ct_core(b, a, b * sched.b(t), a * sched.b(t + 1), clamped);
}

double accel_ct_raw(double abar_prev, double abar_t, double abar_next, bool* clamped) {
  if (abar_t == abar_next)
    throw std::invalid_argument("accel_ct: abar_t equals abar_{t+1} (degenerate denominator)");
  return accel_ct_core(abar_prev, abar_t, abar_prev - abar_t, abar_t - abar_next, clamped);
}

Eigen::VectorXd ddim_simple_step(const ScoreOracle& s, const NoiseSchedule& sched, int t,
                                 const Eigen::VectorXd& y) {
  check_step_range(t, 1, sched.T, "ddim_simple_step");
  const Eigen::VectorXd score = s.evaluate(t, y);
  check_finite(score, t);
  const double alpha = sched.a(t);
  return (y + ((1.0 - alpha) / 2.0) * score) / std::sqrt(alpha);
}

Eigen::VectorXd ddim_eps_step(const ScoreOracle& s, const NoiseSchedule& sched, int t,
                              const Eigen::VectorXd& y) {
  check_step_range(t, 1, sched.T, "ddim_eps_step");
  const Eigen::VectorXd eps = s.evaluate_eps(t, y);
  check_finite(eps, t);
  return y / std::sqrt(sched.a(t)) + ddim_eps_coeff(sched, t) * eps;
}

Eigen::VectorXd ddpm_step_with_noise(const ScoreOracle& s, const NoiseSchedule& sched, int t,
                                     const Eigen::VectorXd& y, const Eigen::VectorXd& z) {
  check_step_range(t, 1, sched.T, "ddpm_step");
  if (z.size() != y.size()) throw std::invalid_argument("ddpm_step: noise dimension mismatch");
  const Eigen::VectorXd score = s.evaluate(t, y);
  check_finite(score, t);
  const double alpha = sched.a(t);
  return (y + (1.0 - alpha) * score + std::sqrt(1.0 - alpha) * z) / std::sqrt(alpha);
}

Eigen::VectorXd ddpm_step(const ScoreOracle& s, const NoiseSchedule& sched, int t,
                          const Eigen::VectorXd& y, GaussianStream& rng) {
  Eigen::VectorXd z(y.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.next();
  return ddpm_step_with_noise(s, sched, t, y, z);
}

Eigen::VectorXd accel_ode_step_midpoint(const ScoreOracle& s, const NoiseSchedule& sched, int t,
                                        const Eigen::VectorXd& y, double momentum_scale) {
  check_step_range(t, 2, sched.T, "accel_ode_step_midpoint");
  const double alpha = sched.a(t);
  const Eigen::VectorXd score = s.evaluate(t, y);
  check_finite(score, t);
  Eigen::VectorXd out = y + ((1.0 - alpha) / 2.0) * score;
  if (momentum_scale != 0.0) {
    const double alpha_next = sched.a(t + 1);
    if (!(alpha_next < 1.0))
      throw SamplerError("degenerate momentum denominator at step " + std::to_string(t), t);
    const double root_next = std::sqrt(alpha_next);
    const Eigen::VectorXd y_mid = root_next * (y - ((1.0 - alpha_next) / 2.0) * score);
    const Eigen::VectorXd score_next = s.evaluate(t + 1, y_mid);
    check_finite(score_next, t);
    const double kappa = (1.0 - alpha) * (1.0 - alpha) / (4.0 * (1.0 - alpha_next));
    out += momentum_scale * kappa * (score - root_next * score_next);
  }
  return out / std::sqrt(alpha);
}

ReuseStepResult accel_ode_step_reuse(const ScoreOracle& eps, const NoiseSchedule& sched, int t,
                                     const Eigen::VectorXd& y,
                                     const Eigen::VectorXd& cached_eps_next) {
  check_step_range(t, 2, sched.T - 1, "accel_ode_step_reuse");
  if (cached_eps_next.size() != y.size())
    throw std::invalid_argument("accel_ode_step_reuse: cache dimension mismatch");
  if (!(sched.b(t + 1) > 0.0))
    throw SamplerError("degenerate reuse denominator at step " + std::to_string(t), t);
  ReuseStepResult res;
  res.eps_t = eps.evaluate_eps(t, y);
  check_finite(res.eps_t, t);
  const double ct = accel_ct(sched, t, &res.arcsin_clamped);
  res.y = y / std::sqrt(sched.a(t)) + ddim_eps_coeff(sched, t) * res.eps_t +
          ct * (cached_eps_next - res.eps_t);
  return res;
}

Eigen::VectorXd accel_sde_step_with_noise(const ScoreOracle& s, const NoiseSchedule& sched,
                                          int t, const Eigen::VectorXd& y,
                                          const Eigen::VectorXd& z,
                                          const Eigen::VectorXd& z_plus) {
  check_step_range(t, 1, sched.T, "accel_sde_step");
  if (z.size() != y.size() || z_plus.size() != y.size())
    throw std::invalid_argument("accel_sde_step: noise dimension mismatch");
  const double alpha = sched.a(t);
  const double half_step = std::sqrt((1.0 - alpha) / 2.0);
  const Eigen::VectorXd y_plus = y + half_step * z;
  const Eigen::VectorXd score = s.evaluate(t, y_plus);
  check_finite(score, t);
  return (y_plus + (1.0 - alpha) * score + half_step * z_plus) / std::sqrt(alpha);
}

Eigen::VectorXd accel_sde_step(const ScoreOracle& s, const NoiseSchedule& sched, int t,
                               const Eigen::VectorXd& y, GaussianStream& rng) {
  Eigen::VectorXd z(y.size()), z_plus(y.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.next();
  for (Eigen::Index i = 0; i < z_plus.size(); ++i) z_plus[i] = rng.next();
  return accel_sde_step_with_noise(s, sched, t, y, z, z_plus);
}

namespace {

class CountingRef final : public ScoreOracle {
 public:
  CountingRef(const ScoreOracle& base, NfeCounter& counter) : base_(base), counter_(counter) {}

  Eigen::VectorXd evaluate(int t, const Eigen::VectorXd& x) const override {
    counter_.increment();
    return base_.evaluate(t, x);
  }

  int dim() const override { return base_.dim(); }
  const NoiseSchedule& schedule() const override { return base_.schedule(); }

 private:
  const ScoreOracle& base_;
  NfeCounter& counter_;
};

}  // namespace

std::uint64_t nfe_per_trajectory(const SamplerSpec& spec, int T, BoundaryMode boundary) {
  spec.validate();
  if (T < 2) throw std::invalid_argument("nfe_per_trajectory: T must be >= 2");
  const auto steps = static_cast<std::uint64_t>(T - 1);
  if (spec.kind == SamplerKind::accel_ode && *spec.ode_mode == OdeMode::midpoint)
    return boundary == BoundaryMode::first_order ? 2 * steps - 1 : 2 * steps;
  return steps;
}

SampleBatch run_sampler(const SamplerSpec& spec, const ScoreOracle& oracle, int d, int n_traj,
                        std::uint64_t seed, const RunOptions& opts) {
  spec.validate();
  if (n_traj < 1) throw std::invalid_argument("run_sampler: n_traj must be >= 1");
  if (d != oracle.dim()) throw std::invalid_argument("run_sampler: d does not match oracle");
  if (opts.threads < 1) throw std::invalid_argument("run_sampler: threads must be >= 1");
  const NoiseSchedule& sched = oracle.schedule();
  const int T = sched.T;
  if (opts.init_override &&
      (opts.init_override->rows() != n_traj || opts.init_override->cols() != d))
    throw std::invalid_argument("run_sampler: init_override must be n_traj x d");

  NfeCounter counter;
  const CountingRef counted(oracle, counter);
  std::atomic<int> clamp_events{0};
  SampleBatch batch;
  batch.y1.resize(n_traj, d);
  const int n_steps = T - 1;
  const int threads = std::min(opts.threads, n_traj);
  std::vector<std::vector<double>> diag(static_cast<std::size_t>(threads));
  if (opts.collect_diagnostics)
    for (auto& v : diag) v.assign(static_cast<std::size_t>(n_steps), 0.0);

  auto run_range = [&](int lo, int hi, int slot) {
    auto record = [&](int t, const Eigen::VectorXd& y) {
      if (opts.collect_diagnostics)
        diag[static_cast<std::size_t>(slot)][static_cast<std::size_t>(T - t)] += y.norm();
    };
    for (int i = lo; i < hi; ++i) {
      GaussianStream rng(derive_stream(seed, {static_cast<std::uint64_t>(i)}));
      Eigen::VectorXd y(d);
      if (opts.init_override) {
        y = opts.init_override->row(i).transpose();
      } else {
        for (int j = 0; j < d; ++j) y[j] = rng.next();
      }
      switch (spec.kind) {
        case SamplerKind::ddim_simple:
          for (int t = T; t >= 2; --t) {
            y = ddim_simple_step(counted, sched, t, y);
            record(t, y);
          }
          break;
        case SamplerKind::ddim_eps:
          for (int t = T; t >= 2; --t) {
            y = ddim_eps_step(counted, sched, t, y);
            record(t, y);
          }
          break;
        case SamplerKind::ddpm:
          for (int t = T; t >= 2; --t) {
            y = ddpm_step(counted, sched, t, y, rng);
            record(t, y);
          }
          break;
        case SamplerKind::accel_sde:
          for (int t = T; t >= 2; --t) {
            y = accel_sde_step(counted, sched, t, y, rng);
            record(t, y);
          }
          break;
        case SamplerKind::accel_ode:
          if (*spec.ode_mode == OdeMode::midpoint) {
            y = opts.boundary == BoundaryMode::alpha_ext
                    ? accel_ode_step_midpoint(counted, sched, T, y)
                    : ddim_simple_step(counted, sched, T, y);
            record(T, y);
            for (int t = T - 1; t >= 2; --t) {
              y = accel_ode_step_midpoint(counted, sched, t, y);
              record(t, y);
            }
          } else {
            // prime the cache: first-order eps step at t = T reusing its eval
            Eigen::VectorXd cache = counted.evaluate_eps(T, y);
            check_finite(cache, T);
            y = y / std::sqrt(sched.a(T)) + ddim_eps_coeff(sched, T) * cache;
            record(T, y);
            for (int t = T - 1; t >= 2; --t) {
              ReuseStepResult res = accel_ode_step_reuse(counted, sched, t, y, cache);
              if (res.arcsin_clamped) clamp_events.fetch_add(1, std::memory_order_relaxed);
              y = std::move(res.y);
              cache = std::move(res.eps_t);
              record(t, y);
            }
          }
          break;
      }
      batch.y1.row(i) = y.transpose();
    }
  };

  if (threads == 1) {
    run_range(0, n_traj, 0);
  } else {
    std::vector<std::thread> pool;
    std::exception_ptr first_error;
    std::mutex error_mutex;
    const int chunk = (n_traj + threads - 1) / threads;
    for (int slot = 0; slot < threads; ++slot) {
      const int lo = slot * chunk;
      const int hi = std::min(n_traj, lo + chunk);
      if (lo >= hi) break;
      pool.emplace_back([&, lo, hi, slot] {
        try {
          run_range(lo, hi, slot);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  batch.nfe = counter.count();
  batch.clamp_events = clamp_events.load();
  if (opts.collect_diagnostics) {
    batch.step_mean_norm.assign(static_cast<std::size_t>(n_steps), 0.0);
    for (const auto& v : diag)
      for (int k = 0; k < n_steps; ++k)
        batch.step_mean_norm[static_cast<std::size_t>(k)] += v[static_cast<std::size_t>(k)];
    for (auto& m : batch.step_mean_norm) m /= n_traj;
  }
  batch.metadata = {{"schema_version", 1},
                    {"sampler", sampler_name(spec)},
                    {"boundary", to_string(opts.boundary)},
                    {"T", T},
                    {"d", d},
                    {"n_traj", n_traj},
                    {"seed", seed},
                    {"nfe", batch.nfe},
                    {"nfe_per_traj", nfe_per_trajectory(spec, T, opts.boundary)},
                    {"clamp_events", batch.clamp_events}};
  return batch;
}

}  // namespace difflab
