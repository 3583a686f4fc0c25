// Experiment runner: schedules, samplers, and analyses as subcommands with
// machine-readable output.  Every command is a deterministic function of its
// config file; metadata blocks embed the config hash, seed, and version so a
// result file identifies the run that produced it.
//
// Exit codes: 0 success, 2 config/parameter error, 3 numerical failure
// (sampler blowups report the step index on stderr).

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "difflab/experiments.hpp"
#include "difflab/io.hpp"
#include "difflab/metrics.hpp"
#include "difflab/mixture.hpp"
#include "difflab/oracle.hpp"
#include "difflab/propagation.hpp"
#include "difflab/ratefit.hpp"
#include "difflab/samplers.hpp"
#include "difflab/schedule.hpp"

namespace {

using namespace difflab;

struct LoadedConfig {
  nlohmann::json json;
  std::string hash;  // fnv1a64 of the raw file bytes, hex
};

LoadedConfig load_config(const std::string& path) {
  const std::string raw = read_file(path);
  LoadedConfig cfg;
  cfg.json = nlohmann::json::parse(raw);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(raw)));
  cfg.hash = buf;
  return cfg;
}

void emit(const std::string& out_path, const std::string& contents) {
  if (out_path.empty()) {
    std::cout << contents;
  } else {
    write_file(out_path, contents);
  }
}

std::map<std::string, std::string> base_metadata(const LoadedConfig* cfg,
                                                 std::uint64_t seed) {
  std::map<std::string, std::string> m;
  m["schema_version"] = std::to_string(kSchemaVersion);
  m["version"] = kVersionString;
  if (cfg) m["config_hash"] = cfg->hash;
  m["seed"] = std::to_string(seed);
  return m;
}

int cmd_schedule(const std::string& config_path, int T, double c0, double c1,
                 const std::string& out_path) {
  std::optional<LoadedConfig> cfg;
  if (!config_path.empty()) {
    cfg = load_config(config_path);
    const nlohmann::json& s =
        cfg->json.contains("schedule") ? cfg->json.at("schedule") : cfg->json;
    T = s.at("T").get<int>();
    c0 = s.value("c0", c0);
    c1 = s.value("c1", c1);
  }
  const ScheduleParams params{T, c0, c1};
  const NoiseSchedule sched = build_schedule(params);
  const ScheduleReport report = validate_schedule(sched, params);

  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["version"] = kVersionString;
  if (cfg) j["config_hash"] = cfg->hash;
  j["schedule"] = schedule_to_json(sched);
  j["alpha_bar_T"] = report.alpha_bar_T;
  j["all_pass"] = report.all_pass();
  j["checks"] = nlohmann::json::array();
  for (const auto& c : report.checks)
    j["checks"].push_back({{"name", c.name}, {"pass", c.pass}, {"margin", c.margin}});

  if (!out_path.empty()) {
    write_file(out_path, j.dump(2) + "\n");
    return 0;
  }
  std::ostringstream os;
  os << "t,beta,alpha,alpha_bar\n";
  for (int t = 1; t <= sched.T; ++t)
    os << t << "," << format_g17(sched.b(t)) << "," << format_g17(sched.a(t)) << ","
       << format_g17(sched.abar(t)) << "\n";
  for (const auto& c : report.checks)
    os << "check " << c.name << ": " << (c.pass ? "PASS" : "FAIL")
       << " (margin=" << format_g17(c.margin) << ")\n";
  os << "alpha_bar_T=" << format_g17(report.alpha_bar_T) << "\n";
  std::cout << os.str();
  return 0;
}

int cmd_sample(const std::string& config_path, const std::string& out_path, int threads) {
  const LoadedConfig cfg = load_config(config_path);
  const ExperimentConfig exp = experiment_config_from_json(cfg.json);
  if (exp.T < 2) throw std::invalid_argument("sample: schedule.T >= 2 required");
  if (exp.samplers.size() != 1)
    throw std::invalid_argument("sample: exactly one sampler required");
  const SamplerSpec spec = exp.samplers.front();
  const NoiseSchedule sched = build_schedule({exp.T, exp.c0, exp.c1});
  const auto oracle = exact_oracle(exp.target, sched);

  RunOptions opts;
  opts.boundary = exp.boundary;
  opts.threads = threads;
  const SampleBatch batch =
      run_sampler(spec, *oracle, exp.target.d, exp.n_traj, exp.seed, opts);

  auto metadata = base_metadata(&cfg, exp.seed);
  metadata["target"] = exp.target_name;
  metadata["sampler"] = sampler_name(spec);
  metadata["boundary"] = to_string(exp.boundary);
  metadata["T"] = std::to_string(exp.T);
  metadata["n_traj"] = std::to_string(exp.n_traj);
  metadata["nfe"] = std::to_string(batch.nfe);
  metadata["nfe_per_traj"] =
      std::to_string(nfe_per_trajectory(spec, exp.T, exp.boundary));
  metadata["clamp_events"] = std::to_string(batch.clamp_events);

  std::vector<std::string> header{"traj_id"};
  for (int jcol = 0; jcol < exp.target.d; ++jcol) header.push_back("y" + std::to_string(jcol));
  std::vector<std::vector<std::string>> rows;
  rows.reserve(static_cast<std::size_t>(batch.y1.rows()));
  for (Eigen::Index i = 0; i < batch.y1.rows(); ++i) {
    std::vector<std::string> row{std::to_string(i)};
    for (Eigen::Index jcol = 0; jcol < batch.y1.cols(); ++jcol)
      row.push_back(format_g17(batch.y1(i, jcol)));
    rows.push_back(std::move(row));
  }
  std::ostringstream os;
  write_csv(os, metadata, header, rows);
  emit(out_path, os.str());
  return 0;
}

int cmd_rate(const std::string& config_path, const std::string& out_path, int threads) {
  const LoadedConfig cfg = load_config(config_path);
  const ExperimentConfig exp = experiment_config_from_json(cfg.json);
  const RateStudyResult result = run_rate_study(exp, threads);

  auto metadata = base_metadata(&cfg, exp.seed);
  metadata["target"] = exp.target_name;
  metadata["path"] = result.mc_path ? "mc" : "exact";
  metadata["fit_metric"] = result.fit_metric;
  metadata["boundary"] = to_string(exp.boundary);

  const std::vector<std::string> header{"T", "sampler", "mode", "metric",
                                        "value", "nfe", "seed"};
  std::vector<std::vector<std::string>> rows;
  rows.reserve(result.rows.size());
  for (const auto& r : result.rows)
    rows.push_back({std::to_string(r.T), r.sampler, r.mode, r.metric, format_g17(r.value),
                    std::to_string(r.nfe), std::to_string(r.seed)});

  std::ostringstream os;
  write_csv(os, metadata, header, rows);
  emit(out_path, os.str());

  nlohmann::json fits = rate_study_to_json(result);
  fits["version"] = kVersionString;
  fits["config_hash"] = cfg.hash;
  fits["seed"] = exp.seed;
  if (out_path.empty()) {
    std::cerr << fits.dump(2) << "\n";  // keep stdout a single CSV document
  } else {
    write_file(out_path + ".fit.json", fits.dump(2) + "\n");
  }
  return 0;
}

int cmd_stability(const std::string& config_path, const std::string& out_path) {
  const LoadedConfig cfg = load_config(config_path);
  const ExperimentConfig exp = experiment_config_from_json(cfg.json);
  if (exp.T < 2) throw std::invalid_argument("stability: schedule.T >= 2 required");
  if (exp.magnitudes.empty())
    throw std::invalid_argument("stability: magnitudes list required");
  const NoiseSchedule sched = build_schedule({exp.T, exp.c0, exp.c1});

  auto metadata = base_metadata(&cfg, exp.seed);
  metadata["target"] = exp.target_name;
  metadata["T"] = std::to_string(exp.T);
  metadata["boundary"] = to_string(exp.boundary);

  const std::vector<std::string> header{"magnitude", "sampler", "mode", "metric", "value"};
  std::vector<std::vector<std::string>> rows;
  for (const auto& spec : exp.samplers) {
    const auto sweep =
        stability_sweep(spec, exp.target, sched, exp.magnitudes, exp.seed, exp.boundary);
    const std::string mode = spec.ode_mode ? to_string(*spec.ode_mode) : "-";
    for (const auto& row : sweep) {
      if (!std::isfinite(row.error)) throw std::domain_error("non-finite stability error");
      rows.push_back({format_g17(row.magnitude), sampler_name(spec), mode, "tv",
                      format_g17(row.error)});
    }
  }
  std::ostringstream os;
  write_csv(os, metadata, header, rows);
  emit(out_path, os.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"difflab: diffusion-sampler numerical laboratory"};
  app.set_version_flag("--version", std::string(kVersionString));
  app.require_subcommand(1);

  std::string config_path, out_path;
  int threads = 1;
  int T = 64;
  double c0 = 2.0, c1 = 4.0;

  auto* sub_schedule = app.add_subcommand("schedule", "Build and validate a noise schedule");
  sub_schedule->add_option("--config", config_path, "JSON config with schedule params");
  sub_schedule->add_option("--T", T, "number of steps");
  sub_schedule->add_option("--c0", c0, "initial-step exponent");
  sub_schedule->add_option("--c1", c1, "growth constant");
  sub_schedule->add_option("--out", out_path, "write JSON here instead of stdout");

  auto* sub_sample = app.add_subcommand("sample", "Run a sampler, emit final points as CSV");
  sub_sample->add_option("--config", config_path, "experiment JSON")->required();
  sub_sample->add_option("--out", out_path, "output CSV path (default stdout)");
  sub_sample->add_option("--threads", threads, "worker threads");

  auto* sub_rate = app.add_subcommand("rate", "Convergence-rate study over a T grid");
  sub_rate->add_option("--config", config_path, "experiment JSON")->required();
  sub_rate->add_option("--out", out_path,
                       "output CSV path; fit summary goes to <out>.fit.json");
  sub_rate->add_option("--threads", threads, "worker threads");

  auto* sub_stability =
      app.add_subcommand("stability", "Score-perturbation sweep (constant shift)");
  sub_stability->add_option("--config", config_path, "experiment JSON")->required();
  sub_stability->add_option("--out", out_path, "output CSV path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (sub_schedule->parsed()) return cmd_schedule(config_path, T, c0, c1, out_path);
    if (sub_sample->parsed()) return cmd_sample(config_path, out_path, threads);
    if (sub_rate->parsed()) return cmd_rate(config_path, out_path, threads);
    if (sub_stability->parsed()) return cmd_stability(config_path, out_path);
  } catch (const SamplerError& e) {
    std::cerr << "error: " << e.what() << " (step " << e.step << ")\n";
    return 3;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::out_of_range& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
