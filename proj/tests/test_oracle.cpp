#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>

#include "hybridcert/certificate.hpp"
#include "hybridcert/oracle.hpp"
#include "support/seed_manifest.hpp"
#include "support/test_random.hpp"

using namespace hybridcert;
using hybridcert::testsupport::Rng;
namespace orc = hybridcert::oracle;

namespace {
struct CdfFaultGuard {
  ~CdfFaultGuard() { set_cdf_fault_for_testing(0.0); }
};
}  // namespace

TEST_CASE("enumerate_channel: single differing position equals the builder") {
  orc::ToyDiscreteSpace space{3, {0}, {1}};
  KernelParams kernel{KernelKind::kUniform, UnitProbability(0.5), 3};
  const auto enumerated = orc::enumerate_channel(space, kernel);
  const auto built = build_uniform_groups(1, UnitProbability(0.5), 3);
  REQUIRE(enumerated.size() == built.size());
  for (std::size_t i = 0; i < built.size(); ++i) {
    CHECK(enumerated.groups[i].clean_mass == built.groups[i].clean_mass);
    CHECK(enumerated.groups[i].adv_mass == built.groups[i].adv_mass);
  }
}

TEST_CASE("enumerate_channel: identical inputs collapse to the trivial group") {
  orc::ToyDiscreteSpace space{4, {2, 1}, {2, 1}};
  KernelParams kernel{KernelKind::kUniform, UnitProbability(0.3), 4};
  const auto g = orc::enumerate_channel(space, kernel);
  REQUIRE(g.size() == 1);
  CHECK(g.groups[0].clean_mass == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(g.groups[0].adv_mass == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("enumerate_channel: absorbing two-position example") {
  orc::ToyDiscreteSpace space{3, {0, 0}, {1, 2}};
  KernelParams kernel{KernelKind::kAbsorbing, UnitProbability(0.5), 3};
  const auto g = orc::enumerate_channel(space, kernel);
  REQUIRE(g.size() == 2);
  CHECK(g.groups[0].clean_mass == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(g.groups[0].adv_mass == 0.0);
  CHECK(g.groups[1].clean_mass == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(g.groups[1].adv_mass == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("enumerate_channel rejects oversized spaces") {
  orc::ToyDiscreteSpace space{7, {0}, {1}};
  KernelParams kernel{KernelKind::kUniform, UnitProbability(0.5), 7};
  CHECK_THROWS_AS(orc::enumerate_channel(space, kernel), ParameterError);
  orc::ToyDiscreteSpace long_space{2, {0, 0, 0, 0, 0}, {1, 1, 1, 1, 1}};
  kernel.vocab_size = 2;
  CHECK_THROWS_AS(orc::enumerate_channel(long_space, kernel), ParameterError);
}

TEST_CASE("oracle_normal_cdf: quadrature path against known anchors") {
  CHECK(orc::oracle_normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(std::abs(orc::oracle_normal_cdf(1.0) - 0.8413447460685429) < 1e-13);
  CHECK(std::abs(orc::oracle_normal_cdf(-1.0) - 0.15865525393145705) < 1e-13);
  // Continued-fraction tail.
  CHECK(orc::oracle_normal_cdf(-10.0) ==
        doctest::Approx(7.61985302416053e-24).epsilon(1e-12));
  CHECK_THROWS_AS(orc::oracle_normal_cdf(std::nan("")), ParameterError);
}

TEST_CASE("quadrature_np_value: trivial channel reproduces the Gaussian form") {
  const GroupedLikelihoodRatio trivial{{{1.0, 1.0}}};
  for (double p_a : {0.6, 0.9, 0.99}) {
    for (double r : {0.5, 1.0, 2.5}) {
      const double quad =
          orc::quadrature_np_value(trivial, 1.0, r, UnitProbability(p_a))
              .value();
      const double closed =
          std_normal_cdf(std_normal_quantile(UnitProbability(p_a)) - r)
              .value();
      REQUIRE(std::abs(quad - closed) < 1e-7);
    }
  }
}

TEST_CASE("quadrature_np_value: absorbing closed form") {
  for (int d : {1, 2}) {
    for (double beta : {0.5, 0.8}) {
      const auto groups = build_absorbing_groups(d, UnitProbability(beta));
      const double p_a = 0.93;
      const double quad =
          orc::quadrature_np_value(groups, 1.0, 1.0, UnitProbability(p_a))
              .value();
      const auto ref = orc::absorbing_reference(d, beta, p_a, 1.0, 1.0);
      REQUIRE(!ref.degenerate);
      REQUIRE(std::abs(quad - ref.value) < 1e-7);
    }
  }
}

TEST_CASE("quadrature_np_value: frozen regression configuration") {
  // Generated by this oracle (deterministic quadrature, no sampling) and
  // frozen on first run.
  const auto groups = build_uniform_groups(2, UnitProbability(0.25), 5);
  const double value =
      orc::quadrature_np_value(groups, 1.0, 2.0, UnitProbability(0.95))
          .value();
  CHECK(value == doctest::Approx(0.034570124260).epsilon(1e-8));
  const double engine =
      worst_case_value(UnitProbability(0.95), 1.0, groups, 2.0, 1e-12).value();
  CHECK(std::abs(value - engine) < 1e-8);
}

TEST_CASE("monte_carlo_verify: accept-all threshold and error paths") {
  const GroupedLikelihoodRatio trivial{{{1.0, 1.0}}};
  const auto check = orc::monte_carlo_verify(
      trivial, 1.0, 1.0, std::numeric_limits<double>::infinity(), 1000, 7);
  CHECK(check.clean_estimate == 1.0);
  CHECK(check.adv_estimate == 1.0);
  CHECK_THROWS_AS(orc::monte_carlo_verify(trivial, 1.0, 1.0, 1.0, 0, 7),
                  ParameterError);
  CHECK_THROWS_AS(orc::monte_carlo_verify(trivial, 1.0, 0.0, 1.0, 10, 7),
                  ParameterError);
}

TEST_CASE("monte_carlo_verify: matches F and V within four sigma") {
  Rng rng(testseed::kOracleSuite);
  for (int trial = 0; trial < 10; ++trial) {
    const double beta = rng.uniform(0.2, 0.8);
    const int d = 1 + rng.uniform_int(2);
    const auto groups =
        build_uniform_groups(d, UnitProbability(beta), 3 + rng.uniform_int(6));
    const double sigma = rng.uniform(0.5, 1.5);
    const double r = rng.uniform(0.3, 1.5);
    const double p_a = rng.uniform(0.4, 0.95);
    HybridProblem problem{UnitProbability(p_a), sigma, groups, r};
    const double t = solve_threshold(problem, 1e-12);
    const double f = capacity_F(t, problem).value();
    const double v = adversarial_value(problem, t).value();
    const std::int64_t n = 1000000;
    const auto mc =
        orc::monte_carlo_verify(groups, sigma, r, t, n, 1000 + trial);
    const double f_sd = std::sqrt(f * (1.0 - f) / n);
    const double v_sd = std::sqrt(v * (1.0 - v) / n);
    REQUIRE(std::abs(mc.clean_estimate - f) <= 4.0 * f_sd);
    REQUIRE(std::abs(mc.adv_estimate - v) <= 4.0 * v_sd);
  }
}

TEST_CASE("monte_carlo_verify: deterministic per seed") {
  const auto groups = build_uniform_groups(1, UnitProbability(0.5), 3);
  const auto a = orc::monte_carlo_verify(groups, 1.0, 1.0, 1.0, 5000, 42);
  const auto b = orc::monte_carlo_verify(groups, 1.0, 1.0, 1.0, 5000, 42);
  CHECK(a.clean_estimate == b.clean_estimate);
  CHECK(a.adv_estimate == b.adv_estimate);
}

TEST_CASE("knapsack_reference mirrors the engine's anchors") {
  const GroupedLikelihoodRatio trivial{{{1.0, 1.0}}};
  CHECK(orc::knapsack_reference(trivial, UnitProbability(0.37)).value() ==
        doctest::Approx(0.37).epsilon(1e-14));
  CHECK(orc::knapsack_reference(build_absorbing_groups(1, UnitProbability(0.5)),
                                UnitProbability(0.9))
            .value() == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(orc::knapsack_reference(
            build_uniform_groups(1, UnitProbability(0.5), 3),
            UnitProbability(0.9))
            .value() == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("absorbing_reference flags the degenerate regime") {
  const auto degenerate = orc::absorbing_reference(2, 0.5, 0.7, 1.0, 1.0);
  CHECK(degenerate.degenerate);
  CHECK(degenerate.value == 0.0);
  const auto fine = orc::absorbing_reference(1, 0.5, 0.9, 1.0, 1.0);
  CHECK(!fine.degenerate);
  CHECK(fine.log_t_star ==
        doctest::Approx(std_normal_quantile(UnitProbability(0.8)) - 0.5)
            .epsilon(1e-12));
}

TEST_CASE("verification grid passes on a reduced budget") {
  orc::VerificationOptions options;
  options.mc_samples = 20000;
  options.mc_configs = 20;
  options.seed = testseed::kOracleSuite;
  const auto report = orc::run_verification(options);
  REQUIRE(report.checks.size() == 4);
  for (const auto& check : report.checks) {
    CAPTURE(check.name);
    CAPTURE(check.max_deviation);
    REQUIRE(check.passed);
  }
  CHECK(report.all_passed());
  CHECK_THROWS_AS(orc::run_verification({0, 10, 1}), ParameterError);
}

TEST_CASE("a corrupted CDF is caught by the quadrature check") {
  CdfFaultGuard guard;
  set_cdf_fault_for_testing(1e-3);
  orc::VerificationOptions options;
  options.mc_samples = 1000;
  options.mc_configs = 2;
  options.seed = testseed::kOracleSuite;
  const auto report = orc::run_verification(options);
  bool quadrature_failed = false;
  for (const auto& check : report.checks) {
    if (check.name == "quadrature_vs_engine") {
      quadrature_failed = !check.passed;
    }
  }
  CHECK(quadrature_failed);
  CHECK(!report.all_passed());
}
