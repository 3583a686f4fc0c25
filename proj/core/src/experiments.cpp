#include "difflab/experiments.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

#include "difflab/io.hpp"
#include "difflab/metrics.hpp"
#include "difflab/oracle.hpp"
#include "difflab/propagation.hpp"
#include "difflab/rng.hpp"

namespace difflab {

namespace {

constexpr std::uint64_t kReferenceTag = 0x7265666572ULL;   // "refer"
constexpr std::uint64_t kDirectionTag = 0x64697273ULL;     // "dirs"
constexpr double kErrorFloor = 1e-13;

void require_finite(double v, const std::string& what) {
  if (!std::isfinite(v)) throw std::domain_error("non-finite metric: " + what);
}

}  // namespace

ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  if (j.contains("schema_version") && j.at("schema_version").get<int>() != kSchemaVersion)
    throw std::invalid_argument("unsupported schema_version");
  if (!j.contains("seed"))
    throw std::invalid_argument("config: seed is required (reruns must be reproducible)");
  cfg.seed = j.at("seed").get<std::uint64_t>();

  const auto& target = j.at("target");
  if (target.is_string()) {
    cfg.target_name = target.get<std::string>();
    cfg.target = preset_mixture(cfg.target_name);
  } else {
    cfg.target_name = "inline";
    cfg.target = mixture_from_json(target);
  }

  if (j.contains("schedule")) {
    const auto& s = j.at("schedule");
    cfg.c0 = s.value("c0", cfg.c0);
    cfg.c1 = s.value("c1", cfg.c1);
    cfg.T = s.value("T", cfg.T);
  }
  if (j.contains("t_grid")) {
    cfg.t_grid = j.at("t_grid").get<std::vector<int>>();
    if (cfg.t_grid.empty()) throw std::invalid_argument("config: t_grid must not be empty");
  }
  if (j.contains("samplers")) {
    cfg.samplers.clear();
    for (const auto& sj : j.at("samplers")) cfg.samplers.push_back(sampler_spec_from_json(sj));
  }
  if (cfg.samplers.empty()) throw std::invalid_argument("config: at least one sampler required");
  cfg.n_traj = j.value("n_traj", cfg.n_traj);
  cfg.n_directions = j.value("n_directions", cfg.n_directions);
  if (j.contains("boundary"))
    cfg.boundary = boundary_from_string(j.at("boundary").get<std::string>());
  if (j.contains("magnitudes"))
    cfg.magnitudes = j.at("magnitudes").get<std::vector<double>>();
  cfg.metric = j.value("metric", std::string{});
  return cfg;
}

RateStudyResult run_rate_study(const ExperimentConfig& cfg, int threads) {
  if (cfg.samplers.empty()) throw std::invalid_argument("rate study: no samplers configured");
  if (cfg.t_grid.empty()) throw std::invalid_argument("rate study: empty T grid");
  for (std::size_t i = 1; i < cfg.t_grid.size(); ++i)
    if (cfg.t_grid[i] <= cfg.t_grid[i - 1])
      throw std::invalid_argument("rate study: T grid must be strictly increasing");

  RateStudyResult result;
  result.mc_path = cfg.target.components.size() > 1;
  const int d = cfg.target.d;
  result.fit_metric = result.mc_path ? "sliced_w1" : (d == 1 ? "tv" : "kl");
  if (!cfg.metric.empty()) {
    const bool ok = result.mc_path ? cfg.metric == "sliced_w1"
                                   : (cfg.metric == "kl" || (cfg.metric == "tv" && d == 1));
    if (!ok)
      throw std::invalid_argument("rate study: metric '" + cfg.metric +
                                  "' unavailable for this target");
    result.fit_metric = cfg.metric;
  }

  std::map<std::string, std::vector<std::pair<double, double>>> fit_points;
  std::vector<std::string> sampler_order;
  auto add_fit_point = [&](const std::string& name, int T, double err) {
    if (err < kErrorFloor) {
      result.excluded.push_back({name, T, err, "below 1e-13 float floor"});
      return;
    }
    fit_points[name].emplace_back(static_cast<double>(T), err);
  };
  for (const auto& spec : cfg.samplers) sampler_order.push_back(sampler_name(spec));

  if (!result.mc_path) {
    for (const auto& spec : cfg.samplers) {
      const std::string name = sampler_name(spec);
      for (int T : cfg.t_grid) {
        const NoiseSchedule sched = build_schedule({T, cfg.c0, cfg.c1});
        PropagateOptions opts;
        opts.boundary = cfg.boundary;
        const AffineLaw law = propagate_affine(spec, cfg.target, sched, opts);
        const AffineLaw q1 = gaussian_marginal_law(cfg.target, sched.abar(1));
        const std::uint64_t nfe = nfe_per_trajectory(spec, T, cfg.boundary);
        const std::string mode = spec.ode_mode ? to_string(*spec.ode_mode) : "-";
        double headline;
        const double kl = kl_gaussian(law, q1);
        require_finite(kl, "kl");
        if (d == 1) {
          const double tv = tv_gaussian_1d(law, q1);
          require_finite(tv, "tv");
          result.rows.push_back({T, name, mode, "tv", tv, nfe, cfg.seed});
          headline = tv;
        } else {
          headline = kl;
        }
        result.rows.push_back({T, name, mode, "kl", kl, nfe, cfg.seed});
        add_fit_point(name, T, result.fit_metric == "kl" ? kl : headline);
      }
    }
  } else {
    if (cfg.n_traj < 100)
      throw std::invalid_argument("rate study: MC path requires n_traj >= 100");
    for (int T : cfg.t_grid) {
      const NoiseSchedule sched = build_schedule({T, cfg.c0, cfg.c1});
      const auto oracle = exact_oracle(cfg.target, sched);
      const std::uint64_t ref_seed =
          derive_stream(cfg.seed, {kReferenceTag, static_cast<std::uint64_t>(T)});
      const Eigen::MatrixXd reference =
          sample_forward(cfg.target, sched.abar(1), cfg.n_traj, ref_seed);
      const std::uint64_t dir_seed =
          derive_stream(cfg.seed, {kDirectionTag, static_cast<std::uint64_t>(T)});
      for (const auto& spec : cfg.samplers) {
        const std::string name = sampler_name(spec);
        const std::uint64_t cell_seed =
            derive_stream(cfg.seed, {fnv1a64(name), static_cast<std::uint64_t>(T)});
        RunOptions ropts;
        ropts.boundary = cfg.boundary;
        ropts.threads = threads;
        const SampleBatch batch = run_sampler(spec, *oracle, d, cfg.n_traj, cell_seed, ropts);
        const double err = sliced_w1(batch.y1, reference, cfg.n_directions, dir_seed);
        require_finite(err, "sliced_w1");
        const std::string mode = spec.ode_mode ? to_string(*spec.ode_mode) : "-";
        result.rows.push_back({T, name, mode, "sliced_w1", err,
                               batch.nfe / static_cast<std::uint64_t>(cfg.n_traj), cell_seed});
        add_fit_point(name, T, err);
      }
    }
  }

  for (const auto& name : sampler_order) {
    const auto& pts = fit_points[name];
    if (pts.size() >= 3) {
      result.fits.emplace_back(name, fit_rate(pts));
    } else {
      result.excluded.push_back(
          {name, 0, 0.0, "fewer than 3 usable points; no fit produced"});
    }
  }
  return result;
}

nlohmann::json rate_study_to_json(const RateStudyResult& result) {
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["path"] = result.mc_path ? "mc" : "exact";
  j["fit_metric"] = result.fit_metric;
  j["fits"] = nlohmann::json::object();
  for (const auto& [name, fit] : result.fits) {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& [T, err] : fit.points) pts.push_back({{"T", T}, {"error", err}});
    j["fits"][name] = {{"slope", fit.slope},
                       {"intercept", fit.intercept},
                       {"r2", fit.r2},
                       {"points", std::move(pts)}};
  }
  j["excluded"] = nlohmann::json::array();
  for (const auto& e : result.excluded)
    j["excluded"].push_back(
        {{"sampler", e.sampler}, {"T", e.T}, {"value", e.value}, {"reason", e.reason}});
  return j;
}

}  // namespace difflab
