#include "difflab/oracle.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "difflab/rng.hpp"
#include "marginal_detail.hpp"

namespace difflab {

namespace {

constexpr std::uint64_t kShiftDirTag = 0x73686966745f6469ULL;  // "shift_di"
constexpr std::uint64_t kFieldDirTag = 0x6669656c645f7761ULL;  // "field_wa"

Eigen::VectorXd gaussian_unit_vector(int d, std::uint64_t key) {
  GaussianStream g(key);
  Eigen::VectorXd v(d);
  for (int i = 0; i < d; ++i) v[i] = g.next();
  const double n = v.norm();
  if (n == 0.0) return Eigen::VectorXd::Unit(d, 0);
  return v / n;
}

class ExactScoreOracle final : public ScoreOracle {
 public:
  ExactScoreOracle(const GaussianMixture& mix, const NoiseSchedule& schedule)
      : sched_(schedule), d_(mix.d) {
    mix.validate();
    if (sched_.T < 2) throw std::invalid_argument("schedule must have T >= 2");
    prepared_.reserve(static_cast<std::size_t>(sched_.T) + 1);
    for (int t = 1; t <= sched_.T + 1; ++t)
      prepared_.push_back(detail::prepare(forward_marginal(mix, sched_.abar(t))));
    if (d_ == 1) {
      // scalar fast path: samplers make O(n_traj T) calls in d = 1 studies
      scalar_.resize(prepared_.size());
      for (std::size_t i = 0; i < prepared_.size(); ++i) {
        for (const auto& c : prepared_[i]) {
          const double var = c.llt.matrixLLT()(0, 0) * c.llt.matrixLLT()(0, 0);
          scalar_[i].push_back(
              {c.log_weight - 0.5 * (c.log_det), c.mean[0], 1.0 / var});
        }
      }
    }
  }

  Eigen::VectorXd evaluate(int t, const Eigen::VectorXd& x) const override {
    check_step(t);
    if (x.size() != d_) throw std::invalid_argument("dimension mismatch");
    if (d_ == 1) {
      const auto& comps = scalar_[static_cast<std::size_t>(t - 1)];
      Eigen::VectorXd out(1);
      if (comps.size() == 1) {
        out[0] = -(x[0] - comps[0].mean) * comps[0].inv_var;
        return out;
      }
      double max_log = -std::numeric_limits<double>::infinity();
      double logp[kMaxScalarComponents];
      for (std::size_t k = 0; k < comps.size(); ++k) {
        const double z = x[0] - comps[k].mean;
        logp[k] = comps[k].log_norm - 0.5 * z * z * comps[k].inv_var;
        max_log = std::max(max_log, logp[k]);
      }
      double wsum = 0.0, acc = 0.0;
      for (std::size_t k = 0; k < comps.size(); ++k) {
        const double w = std::exp(logp[k] - max_log);
        wsum += w;
        acc += w * (-(x[0] - comps[k].mean) * comps[k].inv_var);
      }
      out[0] = acc / wsum;
      return out;
    }
    return detail::score(prepared_[static_cast<std::size_t>(t - 1)], x);
  }

  int dim() const override { return d_; }
  const NoiseSchedule& schedule() const override { return sched_; }

 private:
  static constexpr std::size_t kMaxScalarComponents = 16;  // mixture validation cap
  struct ScalarComponent {
    double log_norm;  // log weight - (1/2) log var (the 2 pi factor cancels)
    double mean;
    double inv_var;
  };
  NoiseSchedule sched_;
  int d_;
  std::vector<std::vector<detail::PreparedComponent>> prepared_;  // [t-1], t = 1..T+1
  std::vector<std::vector<ScalarComponent>> scalar_;
};

class PerturbedScoreOracle final : public ScoreOracle {
 public:
  PerturbedScoreOracle(std::shared_ptr<const ScoreOracle> base, const PerturbationSpec& spec)
      : base_(std::move(base)), spec_(spec) {
    if (!base_) throw std::invalid_argument("perturbed_oracle: null base");
    if (!(spec_.magnitude >= 0.0) || !std::isfinite(spec_.magnitude))
      throw std::invalid_argument("perturbation magnitude must be finite and >= 0");
    u_ = perturbation_direction(base_->dim(), spec_.direction_seed);
    w_ = 3.0 * gaussian_unit_vector(base_->dim(),
                                    derive_stream(spec_.direction_seed, {kFieldDirTag}));
  }

  Eigen::VectorXd evaluate(int t, const Eigen::VectorXd& x) const override {
    Eigen::VectorXd s = base_->evaluate(t, x);
    switch (spec_.mode) {
      case PerturbationMode::constant_shift:
        s += spec_.magnitude * u_;
        break;
      case PerturbationMode::smooth_field:
        s += spec_.magnitude * std::sin(w_.dot(x)) * u_;
        break;
    }
    return s;
  }

  int dim() const override { return base_->dim(); }
  const NoiseSchedule& schedule() const override { return base_->schedule(); }

 private:
  std::shared_ptr<const ScoreOracle> base_;
  PerturbationSpec spec_;
  Eigen::VectorXd u_;
  Eigen::VectorXd w_;
};

class CountingScoreOracle final : public ScoreOracle {
 public:
  CountingScoreOracle(std::shared_ptr<const ScoreOracle> base,
                      std::shared_ptr<NfeCounter> counter)
      : base_(std::move(base)), counter_(std::move(counter)) {
    if (!base_) throw std::invalid_argument("counting_oracle: null base");
  }

  Eigen::VectorXd evaluate(int t, const Eigen::VectorXd& x) const override {
    counter_->increment();
    return base_->evaluate(t, x);
  }

  int dim() const override { return base_->dim(); }
  const NoiseSchedule& schedule() const override { return base_->schedule(); }

 private:
  std::shared_ptr<const ScoreOracle> base_;
  std::shared_ptr<NfeCounter> counter_;
};

class CallableScoreOracle final : public ScoreOracle {
 public:
  CallableScoreOracle(const NoiseSchedule& schedule, int d,
                      std::function<Eigen::VectorXd(int, const Eigen::VectorXd&)> fn)
      : sched_(schedule), d_(d), fn_(std::move(fn)) {
    if (d_ < 1) throw std::invalid_argument("callable_oracle: d must be >= 1");
    if (!fn_) throw std::invalid_argument("callable_oracle: null function");
  }

  Eigen::VectorXd evaluate(int t, const Eigen::VectorXd& x) const override {
    check_step(t);
    return fn_(t, x);
  }

  int dim() const override { return d_; }
  const NoiseSchedule& schedule() const override { return sched_; }

 private:
  NoiseSchedule sched_;
  int d_;
  std::function<Eigen::VectorXd(int, const Eigen::VectorXd&)> fn_;
};

}  // namespace

Eigen::VectorXd ScoreOracle::evaluate_eps(int t, const Eigen::VectorXd& x) const {
  check_step(t);
  return -std::sqrt(1.0 - schedule().abar(t)) * evaluate(t, x);
}

void ScoreOracle::check_step(int t) const {
  if (t < 1 || t > schedule().T + 1)
    throw std::out_of_range("score oracle: step index " + std::to_string(t) +
                            " outside 1.." + std::to_string(schedule().T + 1));
}

std::shared_ptr<ScoreOracle> exact_oracle(const GaussianMixture& mix,
                                          const NoiseSchedule& schedule) {
  return std::make_shared<ExactScoreOracle>(mix, schedule);
}

Eigen::VectorXd perturbation_direction(int d, std::uint64_t direction_seed) {
  if (d < 1) throw std::invalid_argument("perturbation_direction: d must be >= 1");
  return gaussian_unit_vector(d, derive_stream(direction_seed, {kShiftDirTag}));
}

std::shared_ptr<ScoreOracle> perturbed_oracle(std::shared_ptr<const ScoreOracle> base,
                                              const PerturbationSpec& spec) {
  return std::make_shared<PerturbedScoreOracle>(std::move(base), spec);
}

std::pair<std::shared_ptr<ScoreOracle>, std::shared_ptr<NfeCounter>> counting_oracle(
    std::shared_ptr<const ScoreOracle> base) {
  auto counter = std::make_shared<NfeCounter>();
  auto oracle = std::make_shared<CountingScoreOracle>(std::move(base), counter);
  return {std::move(oracle), std::move(counter)};
}

std::shared_ptr<ScoreOracle> callable_oracle(
    const NoiseSchedule& schedule, int d,
    std::function<Eigen::VectorXd(int, const Eigen::VectorXd&)> fn) {
  return std::make_shared<CallableScoreOracle>(schedule, d, std::move(fn));
}

double empirical_rms_error(const ScoreOracle& a, const ScoreOracle& b,
                           const GaussianMixture& mix, int t, int n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("empirical_rms_error requires n >= 1");
  const double abar = a.schedule().abar(t);
  const Eigen::MatrixXd draws = sample_forward(mix, abar, n, seed);
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd x = draws.row(i).transpose();
    acc += (a.evaluate(t, x) - b.evaluate(t, x)).squaredNorm();
  }
  return std::sqrt(acc / n);
}

nlohmann::json perturbation_to_json(const PerturbationSpec& spec) {
  return {{"magnitude", spec.magnitude},
          {"mode", spec.mode == PerturbationMode::constant_shift ? "constant_shift"
                                                                 : "smooth_field"},
          {"direction_seed", spec.direction_seed}};
}

PerturbationSpec perturbation_from_json(const nlohmann::json& j) {
  PerturbationSpec spec;
  spec.magnitude = j.at("magnitude").get<double>();
  const std::string mode = j.at("mode").get<std::string>();
  if (mode == "constant_shift") {
    spec.mode = PerturbationMode::constant_shift;
  } else if (mode == "smooth_field") {
    spec.mode = PerturbationMode::smooth_field;
  } else {
    throw std::invalid_argument("unknown perturbation mode: " + mode);
  }
  spec.direction_seed = j.value("direction_seed", std::uint64_t{0});
  return spec;
}

}  // namespace difflab
