// Microbenchmarks for the hot paths: oracle evaluation dominates every
// Monte Carlo study (O(n_traj * T) calls), so it gets the most attention.
// Not part of the ctest suite; run the binary directly.

#include <benchmark/benchmark.h>

#include <Eigen/Dense>

#include <difflab/metrics.hpp>
#include <difflab/mixture.hpp>
#include <difflab/oracle.hpp>
#include <difflab/propagation.hpp>
#include <difflab/rng.hpp>
#include <difflab/samplers.hpp>
#include <difflab/schedule.hpp>

using namespace difflab;

namespace {

void bm_build_schedule(benchmark::State& state) {
  const int T = static_cast<int>(state.range(0));
  for (auto _ : state) {
    auto sched = build_schedule({T, 2.0, 4.0});
    benchmark::DoNotOptimize(sched.abar(T));
  }
}
BENCHMARK(bm_build_schedule)->Arg(64)->Arg(1024);

void bm_oracle_eval(benchmark::State& state, const char* preset) {
  auto mix = preset_mixture(preset);
  auto sched = build_schedule({256, 2.0, 4.0});
  auto oracle = exact_oracle(mix, sched);
  Eigen::MatrixXd probes = sample_forward(mix, sched.abar(128), 64, 9);
  Eigen::VectorXd x(mix.d);
  int i = 0;
  for (auto _ : state) {
    x = probes.row(i & 63).transpose();
    benchmark::DoNotOptimize(oracle->evaluate(128, x));
    ++i;
  }
}
BENCHMARK_CAPTURE(bm_oracle_eval, std_normal_d1, "std_normal");
BENCHMARK_CAPTURE(bm_oracle_eval, bimodal_d1, "bimodal_1d");
BENCHMARK_CAPTURE(bm_oracle_eval, grid4_d2, "grid4_2d");

void bm_run_sampler(benchmark::State& state, SamplerSpec spec) {
  auto mix = preset_mixture("bimodal_1d");
  auto sched = build_schedule({64, 2.0, 4.0});
  auto oracle = exact_oracle(mix, sched);
  for (auto _ : state) {
    auto batch = run_sampler(spec, *oracle, 1, 256, 11);
    benchmark::DoNotOptimize(batch.y1(0, 0));
  }
  state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK_CAPTURE(bm_run_sampler, ddim_eps, SamplerSpec{SamplerKind::ddim_eps, {}});
BENCHMARK_CAPTURE(bm_run_sampler, ddpm, SamplerSpec{SamplerKind::ddpm, {}});
BENCHMARK_CAPTURE(bm_run_sampler, accel_reuse,
                  SamplerSpec{SamplerKind::accel_ode, OdeMode::reuse});
BENCHMARK_CAPTURE(bm_run_sampler, accel_midpoint,
                  SamplerSpec{SamplerKind::accel_ode, OdeMode::midpoint});
BENCHMARK_CAPTURE(bm_run_sampler, accel_sde, SamplerSpec{SamplerKind::accel_sde, {}});

void bm_propagate_affine(benchmark::State& state) {
  auto mix = preset_mixture("shifted_1d");
  auto sched = build_schedule({static_cast<int>(state.range(0)), 2.0, 4.0});
  const SamplerSpec spec{SamplerKind::accel_ode, OdeMode::reuse};
  for (auto _ : state) {
    auto law = propagate_affine(spec, mix, sched);
    benchmark::DoNotOptimize(law.mean[0]);
  }
}
BENCHMARK(bm_propagate_affine)->Arg(64)->Arg(512);

void bm_tv_gaussian_1d(benchmark::State& state) {
  auto a = make_affine_law(Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1));
  auto b = make_affine_law(Eigen::VectorXd::Constant(1, 0.3),
                           Eigen::MatrixXd::Constant(1, 1, 1.7));
  for (auto _ : state) benchmark::DoNotOptimize(tv_gaussian_1d(a, b));
}
BENCHMARK(bm_tv_gaussian_1d);

void bm_sliced_w1(benchmark::State& state) {
  auto mix = preset_mixture("grid4_2d");
  Eigen::MatrixXd a = sample_forward(mix, 0.9, static_cast<int>(state.range(0)), 5);
  Eigen::MatrixXd b = sample_forward(mix, 0.9, static_cast<int>(state.range(0)), 6);
  for (auto _ : state) benchmark::DoNotOptimize(sliced_w1(a, b, 64, 7));
}
BENCHMARK(bm_sliced_w1)->Arg(1000)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();
