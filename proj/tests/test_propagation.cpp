#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include <difflab/metrics.hpp>
#include <difflab/oracle.hpp>
#include <difflab/propagation.hpp>
#include <difflab/samplers.hpp>

using namespace difflab;

TEST_SUITE("propagation") {

TEST_CASE("make_affine_law symmetrizes and guards") {
  Eigen::MatrixXd almost(2, 2);
  almost << 1.0, 0.3 + 5e-13, 0.3, 0.5;
  auto law = make_affine_law(Eigen::Vector2d(1.0, -1.0), almost);
  CHECK(law.cov(0, 1) == law.cov(1, 0));

  Eigen::MatrixXd tiny_neg = -1e-13 * Eigen::MatrixXd::Identity(2, 2);
  auto clamped = make_affine_law(Eigen::Vector2d::Zero(), tiny_neg);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(clamped.cov);
  CHECK(eig.eigenvalues().minCoeff() >= 0.0);

  Eigen::MatrixXd bad = -1e-3 * Eigen::MatrixXd::Identity(2, 2);
  CHECK_THROWS_AS(make_affine_law(Eigen::Vector2d::Zero(), bad), std::invalid_argument);
}

TEST_CASE("gaussian_marginal_law matches forward_marginal") {
  auto target = preset_mixture("shifted_1d");
  const double abar = 0.42;
  auto law = gaussian_marginal_law(target, abar);
  auto m = forward_marginal(target, abar);
  CHECK(law.mean[0] == doctest::Approx(m.mix.components[0].mean[0]).epsilon(1e-15));
  CHECK(law.cov(0, 0) == doctest::Approx(m.mix.components[0].cov(0, 0)).epsilon(1e-15));
}

TEST_CASE("zero steps return the reverse-process initialization") {
  auto sched = build_schedule({16, 2.0, 4.0});
  PropagateOptions opts;
  opts.max_steps = 0;
  auto law = propagate_affine({SamplerKind::ddim_eps, {}}, preset_mixture("std_normal"),
                              sched, opts);
  CHECK(law.mean.norm() == 0.0);
  CHECK(law.cov.isApprox(Eigen::MatrixXd::Identity(1, 1)));
}

TEST_CASE("one exact step matches the hand-derived affine update") {
  // std_normal keeps q_t = N(0,1), so G_t = -1 at every t and one
  // ddim_simple step maps variance v to v ((1 - (1-a)/2 (-1)) ... )^2 with
  // a = alpha_T; starting from v = 1
  auto sched = build_schedule({16, 2.0, 4.0});
  PropagateOptions opts;
  opts.max_steps = 1;
  auto law = propagate_affine({SamplerKind::ddim_simple, {}}, preset_mixture("std_normal"),
                              sched, opts);
  const double a = sched.a(16);
  const double f = (1.0 - 0.5 * (1.0 - a)) / std::sqrt(a);
  CHECK(law.mean[0] == 0.0);
  CHECK(law.cov(0, 0) == doctest::Approx(f * f).epsilon(1e-14));
}

TEST_CASE("deterministic mean equals the trajectory of the mean") {
  // each deterministic sampler is one affine map of Y_T, so the propagated
  // mean must equal a single trajectory started at the N(0,I) mean, and a
  // constant score shift must act identically on both sides
  auto sched = build_schedule({24, 2.0, 4.0});
  auto target = preset_mixture("shifted_1d");
  auto base = exact_oracle(target, sched);

  PerturbationSpec pert;
  pert.magnitude = 0.07;
  pert.mode = PerturbationMode::constant_shift;
  pert.direction_seed = 3;
  auto shifted = perturbed_oracle(base, pert);

  PropagateOptions popts;
  popts.score_shift = pert.magnitude * perturbation_direction(1, pert.direction_seed);

  RunOptions ropts;
  ropts.init_override = Eigen::MatrixXd::Zero(1, 1);

  for (auto spec : {SamplerSpec{SamplerKind::ddim_simple, {}},
                    SamplerSpec{SamplerKind::ddim_eps, {}},
                    SamplerSpec{SamplerKind::accel_ode, OdeMode::midpoint},
                    SamplerSpec{SamplerKind::accel_ode, OdeMode::reuse}}) {
    CAPTURE(sampler_name(spec));
    auto law = propagate_affine(spec, target, sched, popts);
    auto batch = run_sampler(spec, *shifted, 1, 1, 11, ropts);
    CHECK(batch.y1(0, 0) == doctest::Approx(law.mean[0]).epsilon(1e-12));
  }
}

TEST_CASE("stochastic covariances match Monte Carlo moments") {
  auto sched = build_schedule({16, 2.0, 4.0});
  auto target = preset_mixture("std_normal");
  auto oracle = exact_oracle(target, sched);
  const int n = 20000;
  for (auto spec :
       {SamplerSpec{SamplerKind::ddpm, {}}, SamplerSpec{SamplerKind::accel_sde, {}}}) {
    CAPTURE(sampler_name(spec));
    auto law = propagate_affine(spec, target, sched);
    auto batch = run_sampler(spec, *oracle, 1, n, 29);
    const double mean = batch.y1.col(0).mean();
    const double var =
        (batch.y1.col(0).array() - mean).square().sum() / (n - 1);
    // 6 sigma MC bands
    CHECK(std::abs(mean - law.mean[0]) < 6.0 * std::sqrt(law.cov(0, 0) / n));
    CHECK(std::abs(var - law.cov(0, 0)) < 6.0 * law.cov(0, 0) * std::sqrt(2.0 / (n - 1)));
  }
}

TEST_CASE("propagated laws approach the target marginal as T grows") {
  auto target = preset_mixture("shifted_1d");
  double prev = 1.0;
  for (int T : {16, 64, 256}) {
    auto sched = build_schedule({T, 2.0, 4.0});
    auto law = propagate_affine({SamplerKind::ddim_eps, {}}, target, sched);
    const double tv = tv_gaussian_1d(law, gaussian_marginal_law(target, sched.abar(1)));
    CHECK(tv < prev);
    prev = tv;
  }
  CHECK(prev < 7e-3);
}

TEST_CASE("multi-component targets are rejected") {
  auto sched = build_schedule({16, 2.0, 4.0});
  CHECK_THROWS_WITH_AS(
      propagate_affine({SamplerKind::ddim_eps, {}}, preset_mixture("bimodal_1d"), sched),
      "propagation requires affine score", std::invalid_argument);
}

}  // TEST_SUITE
