#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

#include <difflab/experiments.hpp>
#include <difflab/metrics.hpp>
#include <difflab/ratefit.hpp>

using namespace difflab;

namespace {

nlohmann::json base_config() {
  return nlohmann::json{
      {"schema_version", 1},
      {"seed", 7},
      {"target", "std_normal"},
      {"samplers", nlohmann::json::array({"ddim_eps", "accel_ode(reuse)"})},
  };
}

const RateFit* find_fit(const RateStudyResult& r, const std::string& name) {
  for (const auto& [n, fit] : r.fits)
    if (n == name) return &fit;
  return nullptr;
}

double find_row(const RateStudyResult& r, const std::string& sampler, int T,
                const std::string& metric) {
  for (const auto& row : r.rows)
    if (row.sampler == sampler && row.T == T && row.metric == metric) return row.value;
  throw std::runtime_error("row not found");
}

}  // namespace

TEST_SUITE("analysis") {

TEST_CASE("fit_rate recovers a planted power law") {
  std::vector<std::pair<double, double>> pts;
  for (double T : {8.0, 16.0, 32.0, 64.0, 128.0}) pts.push_back({T, 3.0 * std::pow(T, -1.5)});
  auto fit = fit_rate(pts);
  CHECK(fit.slope == doctest::Approx(-1.5).epsilon(1e-12));
  CHECK(fit.intercept == doctest::Approx(std::log(3.0)).epsilon(1e-10));
  CHECK(fit.r2 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fit.points.size() == 5);

  // equal errors: zero slope with r2 defined as a perfect fit
  std::vector<std::pair<double, double>> flat = {{8, 0.5}, {16, 0.5}, {32, 0.5}};
  auto ffit = fit_rate(flat);
  CHECK(ffit.slope == 0.0);
  CHECK(ffit.r2 == 1.0);
}

TEST_CASE("fit_rate input guards") {
  CHECK_THROWS_AS(fit_rate({{8, 1.0}, {16, 0.5}}), std::invalid_argument);
  CHECK_THROWS_AS(fit_rate({{8, 1.0}, {8, 0.5}, {16, 0.2}}), std::invalid_argument);
  CHECK_THROWS_AS(fit_rate({{8, 1.0}, {16, 0.0}, {32, 0.2}}), std::invalid_argument);
  CHECK_THROWS_AS(fit_rate({{16, 1.0}, {8, 0.5}, {32, 0.2}}), std::invalid_argument);
}

TEST_CASE("fit_linear on exact and noisy lines") {
  auto exact = fit_linear({{0, 1}, {1, 3}, {2, 5}, {3, 7}});
  CHECK(exact.slope == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(exact.intercept == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(exact.r2 == doctest::Approx(1.0).epsilon(1e-14));

  auto noisy = fit_linear({{0, 1.05}, {1, 2.93}, {2, 5.02}, {3, 7.1}});
  CHECK(noisy.slope == doctest::Approx(2.0).epsilon(0.05));
  CHECK(noisy.r2 > 0.99);

  CHECK_THROWS_AS(fit_linear({{1, 1}}), std::invalid_argument);
  CHECK_THROWS_AS(fit_linear({{1, 1}, {1, 2}}), std::invalid_argument);
}

TEST_CASE("stability_sweep baseline equals the unperturbed propagation") {
  auto target = preset_mixture("std_normal");
  auto sched = build_schedule({64, 2.0, 4.0});
  SamplerSpec spec{SamplerKind::accel_ode, OdeMode::reuse};
  auto rows = stability_sweep(spec, target, sched, {0.0, 1e-3, 1e-2, 1e-1});
  REQUIRE(rows.size() == 4);

  auto law = propagate_affine(spec, target, sched);
  const double base = tv_gaussian_1d(law, gaussian_marginal_law(target, sched.abar(1)));
  CHECK(rows[0].magnitude == 0.0);
  CHECK(rows[0].error == doctest::Approx(base).epsilon(1e-13));

  // degradation grows with the injected error size
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].error > rows[i - 1].error);

  CHECK_THROWS_AS(stability_sweep(spec, target, sched, {1e-2, 1e-3}), std::invalid_argument);
  CHECK_THROWS_AS(stability_sweep(spec, target, sched, {-1e-3}), std::invalid_argument);
  CHECK_THROWS_AS(stability_sweep(spec, preset_mixture("bimodal_1d"), sched, {0.0, 1e-3}),
                  std::invalid_argument);
}

TEST_CASE("config parsing applies defaults and validates") {
  auto cfg = experiment_config_from_json(base_config());
  CHECK(cfg.target_name == "std_normal");
  CHECK(cfg.c0 == 2.0);
  CHECK(cfg.c1 == 4.0);
  CHECK(cfg.t_grid == std::vector<int>{16, 32, 64, 128, 256, 512});
  CHECK(cfg.n_traj == 200000);
  CHECK(cfg.n_directions == 64);
  CHECK(cfg.boundary == BoundaryMode::first_order);
  REQUIRE(cfg.samplers.size() == 2);
  CHECK(sampler_name(cfg.samplers[1]) == "accel_ode(reuse)");

  auto no_seed = base_config();
  no_seed.erase("seed");
  CHECK_THROWS_WITH_AS(experiment_config_from_json(no_seed),
                       "config: seed is required (reruns must be reproducible)",
                       std::invalid_argument);

  auto wrong_schema = base_config();
  wrong_schema["schema_version"] = 99;
  CHECK_THROWS_AS(experiment_config_from_json(wrong_schema), std::invalid_argument);

  auto no_samplers = base_config();
  no_samplers.erase("samplers");
  CHECK_THROWS_AS(experiment_config_from_json(no_samplers), std::invalid_argument);

  auto bad_metric = base_config();
  bad_metric["metric"] = "hellinger";
  CHECK_THROWS_AS(run_rate_study(experiment_config_from_json(bad_metric)),
                  std::invalid_argument);

  auto inline_target = base_config();
  inline_target["target"] = mixture_to_json(preset_mixture("shifted_1d"));
  auto cfg2 = experiment_config_from_json(inline_target);
  CHECK(cfg2.target_name == "inline");
  CHECK(cfg2.target.components[0].mean[0] == 1.5);
}

TEST_CASE("exact-path study reproduces pinned tv values") {
  auto j = base_config();
  j["t_grid"] = {16, 64, 512};
  auto result = run_rate_study(experiment_config_from_json(j));
  CHECK_FALSE(result.mc_path);
  CHECK(result.fit_metric == "tv");
  CHECK(result.excluded.empty());

  // frozen outputs of the exact propagation pipeline on the reference grid
  CHECK(find_row(result, "accel_ode(reuse)", 16, "tv") ==
        doctest::Approx(5.3319898160696204e-3).epsilon(1e-10));
  CHECK(find_row(result, "accel_ode(reuse)", 512, "tv") ==
        doctest::Approx(4.2271435261935065e-5).epsilon(1e-10));

  // both metrics are reported per cell for d = 1, and kl respects pinsker
  const double tv16 = find_row(result, "ddim_eps", 16, "tv");
  const double kl16 = find_row(result, "ddim_eps", 16, "kl");
  CHECK(tv16 <= std::sqrt(0.5 * kl16) + 1e-9);

  // rows carry the formula nfe and the configured seed
  for (const auto& row : result.rows) {
    CHECK(row.nfe == static_cast<std::uint64_t>(row.T - 1));
    CHECK(row.seed == 7);
  }

  const auto* fit = find_fit(result, "accel_ode(reuse)");
  REQUIRE(fit != nullptr);
  CHECK(fit->points.size() == 3);
  CHECK(fit->slope < -1.0);
}

TEST_CASE("kl is the fit metric when the exact target is not 1d") {
  // anisotropic single gaussian in 2d: exact path exists but tv_gaussian_1d
  // does not apply, so fits fall back to kl rows
  GaussianMixture aniso;
  aniso.d = 2;
  aniso.components.resize(1);
  aniso.components[0].weight = 1.0;
  aniso.components[0].mean = Eigen::Vector2d(0.5, -0.25);
  aniso.components[0].cov = (Eigen::Matrix2d() << 0.8, 0.3, 0.3, 1.5).finished();

  auto j = base_config();
  j["target"] = mixture_to_json(aniso);
  j["t_grid"] = {16, 32, 64};
  auto result = run_rate_study(experiment_config_from_json(j));
  CHECK_FALSE(result.mc_path);
  CHECK(result.fit_metric == "kl");
  for (const auto& row : result.rows) CHECK(row.metric == "kl");
  CHECK(find_fit(result, "ddim_eps") != nullptr);
}

TEST_CASE("mc-path study is deterministic and orders the accelerated pair") {
  auto j = base_config();
  j["target"] = "bimodal_1d";
  j["t_grid"] = {16, 32, 64};
  j["n_traj"] = 4000;
  auto cfg = experiment_config_from_json(j);
  auto a = run_rate_study(cfg);
  auto b = run_rate_study(cfg, 3);  // thread count must not matter
  CHECK(a.mc_path);
  CHECK(a.fit_metric == "sliced_w1");
  REQUIRE(a.rows.size() == b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].value == b.rows[i].value);
    CHECK(a.rows[i].nfe == static_cast<std::uint64_t>(a.rows[i].T - 1));
  }
  // per-T cell seeds differ between samplers and sizes
  CHECK(a.rows[0].seed != a.rows[1].seed);

  auto tiny = j;
  tiny["n_traj"] = 50;
  CHECK_THROWS_AS(run_rate_study(experiment_config_from_json(tiny)), std::invalid_argument);
}

TEST_CASE("rate study rejects a non-increasing grid") {
  auto j = base_config();
  j["t_grid"] = {16, 16, 32};
  CHECK_THROWS_AS(run_rate_study(experiment_config_from_json(j)), std::invalid_argument);
}

TEST_CASE("study json carries the path, fits, and exclusions") {
  auto j = base_config();
  j["t_grid"] = {16, 32, 64};
  auto result = run_rate_study(experiment_config_from_json(j));
  auto out = nlohmann::json::parse(rate_study_to_json(result).dump());
  CHECK(out.at("schema_version").get<int>() == 1);
  CHECK(out.at("path").get<std::string>() == "exact");
  CHECK(out.at("fit_metric").get<std::string>() == "tv");
  CHECK(out.at("fits").size() == 2);
  const auto& fit = out.at("fits").at("ddim_eps");
  CHECK(fit.contains("slope"));
  CHECK(fit.contains("r2"));
  CHECK(fit.at("points").size() == 3);
  CHECK(out.at("excluded").empty());
}

}  // TEST_SUITE
