#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include <difflab/schedule.hpp>

using namespace difflab;

TEST_SUITE("schedule") {

TEST_CASE("frozen values small T") {
  // hand-checked: beta_1 = T^{-2} = 0.01; beta_5 still on the ramp
  auto s = build_schedule({10, 2.0, 1.0});
  CHECK(s.beta[1] == doctest::Approx(0.01).epsilon(1e-15));
  CHECK(s.beta[5] == doctest::Approx(0.006489295885210626).epsilon(1e-14));

  auto s4 = build_schedule({4, 2.0, 1.0});
  CHECK(s4.beta[2] == doctest::Approx(0.039276761171105595).epsilon(1e-14));
}

TEST_CASE("frozen values T=64 reference grid point") {
  auto s = build_schedule({64, 2.0, 4.0});
  const double rate = 4.0 * std::log(64.0) / 64.0;
  CHECK(rate == doctest::Approx(0.25993019270997947).epsilon(1e-15));
  CHECK(s.beta[1] == doctest::Approx(std::pow(64.0, -2.0)).epsilon(1e-15));
  CHECK(s.beta[2] == doctest::Approx(0.00010073717035075741).epsilon(1e-14));
  CHECK(s.alpha_bar[64] == doctest::Approx(5.580158545631947e-05).epsilon(1e-13));
}

TEST_CASE("two-phase shape: geometric ramp then clamp at the rate") {
  auto s = build_schedule({16, 2.0, 4.0});
  const double rate = 4.0 * std::log(16.0) / 16.0;
  // ramp strictly increasing until the clamp, constant after
  int first_clamped = 0;
  for (int t = 2; t <= 16; ++t) {
    if (s.beta[static_cast<std::size_t>(t)] == rate) {
      first_clamped = t;
      break;
    }
  }
  CHECK(first_clamped == 11);
  for (int t = 2; t < first_clamped; ++t)
    CHECK(s.beta[static_cast<std::size_t>(t)] < s.beta[static_cast<std::size_t>(t + 1)]);
  for (int t = first_clamped; t <= 16; ++t)
    CHECK(s.beta[static_cast<std::size_t>(t)] == rate);
  CHECK(1.0 - rate == doctest::Approx(0.3068528194400547).epsilon(1e-15));
}

TEST_CASE("alpha and alpha_bar are consistent with beta") {
  auto s = build_schedule({32, 2.0, 4.0});
  double prod = 1.0;
  for (int t = 1; t <= 32; ++t) {
    CHECK(s.alpha[static_cast<std::size_t>(t)] ==
          1.0 - s.beta[static_cast<std::size_t>(t)]);
    prod *= s.alpha[static_cast<std::size_t>(t)];
    CHECK(s.alpha_bar[static_cast<std::size_t>(t)] == doctest::Approx(prod).epsilon(1e-15));
  }
  CHECK(s.alpha_bar[0] == 1.0);
  CHECK(s.alpha_ext == s.alpha[32]);
}

TEST_CASE("indexed accessors and the boundary extension") {
  auto s = build_schedule({8, 2.0, 2.0});
  for (int t = 1; t <= 8; ++t) {
    CHECK(s.a(t) == s.alpha[static_cast<std::size_t>(t)]);
    CHECK(s.abar(t) == s.alpha_bar[static_cast<std::size_t>(t)]);
  }
  CHECK(s.a(9) == s.alpha_ext);
  CHECK(s.abar(9) == s.alpha_bar[8] * s.alpha_ext);
  CHECK_THROWS_AS(s.a(0), std::out_of_range);
}

TEST_CASE("build rejects bad parameters") {
  CHECK_THROWS_AS(build_schedule({1, 2.0, 4.0}), std::invalid_argument);
  CHECK_THROWS_AS(build_schedule({64, 0.0, 4.0}), std::invalid_argument);
  CHECK_THROWS_AS(build_schedule({64, 2.0, -1.0}), std::invalid_argument);
  // c1 ln T / T >= 1 pushes beta out of (0,1)
  CHECK_THROWS_WITH_AS(build_schedule({8, 2.0, 64.0}), "schedule overflow",
                       std::invalid_argument);
}

TEST_CASE("validate_schedule passes for a well-sized schedule") {
  ScheduleParams p{64, 2.0, 4.0};
  auto report = validate_schedule(build_schedule(p), p);
  CHECK(report.checks.size() == 7);
  CHECK(report.all_pass());
  for (const auto& c : report.checks) CHECK(c.pass);
  CHECK(report.alpha_bar_T == doctest::Approx(5.580158545631947e-05).epsilon(1e-13));
}

TEST_CASE("validate_schedule reports the small-T contraction violation") {
  // at T = 16, c1 = 4 the clamped rate exceeds 1/2, so alpha_t < 1/2 on the
  // tail; the check must fail truthfully rather than be waived
  ScheduleParams p{16, 2.0, 4.0};
  auto report = validate_schedule(build_schedule(p), p);
  CHECK_FALSE(report.all_pass());
  bool found = false;
  for (const auto& c : report.checks) {
    if (c.name == "alpha_ge_half") {
      found = true;
      CHECK_FALSE(c.pass);
      CHECK(c.margin == doctest::Approx(-0.19314718055994529).epsilon(1e-13));
    } else {
      CHECK(c.pass);
    }
  }
  CHECK(found);
}

TEST_CASE("json round trip") {
  auto s = build_schedule({12, 2.0, 3.0});
  auto j = schedule_to_json(s);
  CHECK(j.at("T").get<int>() == 12);
  auto s2 = schedule_from_json(nlohmann::json::parse(j.dump()));
  CHECK(s2.T == s.T);
  CHECK(s2.c0 == s.c0);
  CHECK(s2.c1 == s.c1);
  for (int t = 1; t <= 12; ++t) {
    CHECK(s2.beta[static_cast<std::size_t>(t)] == s.beta[static_cast<std::size_t>(t)]);
    CHECK(s2.alpha_bar[static_cast<std::size_t>(t)] ==
          s.alpha_bar[static_cast<std::size_t>(t)]);
  }
  CHECK(s2.alpha_ext == s.alpha_ext);
}

}  // TEST_SUITE
