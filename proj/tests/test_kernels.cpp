#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "nlohmann/json.hpp"

#include "hybridcert/kernels.hpp"
#include "hybridcert/oracle.hpp"
#include "support/seed_manifest.hpp"
#include "support/test_random.hpp"

using namespace hybridcert;
using hybridcert::testsupport::Rng;

TEST_CASE("uniform builder: d = 0 is the trivial channel") {
  const auto g = build_uniform_groups(0, UnitProbability(0.3), 17);
  REQUIRE(g.size() == 1);
  CHECK(g.groups[0].clean_mass == 1.0);
  CHECK(g.groups[0].adv_mass == 1.0);
  CHECK(g.is_trivial());
}

TEST_CASE("uniform builder: d=1, beta=0.5, V=3 hand enumeration") {
  // Single differing position, alpha = 0.25: outcomes are the clean token
  // (clean 0.5, adv 0.25), the third token (0.25, 0.25), and the adversarial
  // token (0.25, 0.5).
  const auto g = build_uniform_groups(1, UnitProbability(0.5), 3);
  REQUIRE(g.size() == 3);
  CHECK(g.groups[0].clean_mass == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(g.groups[0].adv_mass == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(g.groups[0].ratio() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(g.groups[1].ratio() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(g.groups[2].ratio() == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("uniform builder: mass conservation on both channels") {
  for (int d : {1, 2, 3, 5, 8}) {
    for (double beta : {0.1, 0.25, 0.5, 0.9}) {
      for (int v : {2, 3, 50, 100000}) {
        const auto g = build_uniform_groups(d, UnitProbability(beta), v);
        CHECK(std::abs(g.total_clean_mass() - 1.0) < 1e-12);
        CHECK(std::abs(g.total_adv_mass() - 1.0) < 1e-12);
        CHECK_NOTHROW(g.validate());
      }
    }
  }
}

TEST_CASE("uniform builder: self-dual channel") {
  // Sorting the adversarial masses must reproduce the sorted clean masses.
  const auto g = build_uniform_groups(3, UnitProbability(0.35), 7);
  std::vector<double> clean;
  std::vector<double> adv;
  for (const auto& grp : g.groups) {
    clean.push_back(grp.clean_mass);
    adv.push_back(grp.adv_mass);
  }
  std::sort(clean.begin(), clean.end());
  std::sort(adv.begin(), adv.end());
  for (std::size_t i = 0; i < clean.size(); ++i) {
    CHECK(clean[i] == doctest::Approx(adv[i]).epsilon(1e-12));
  }
}

TEST_CASE("uniform builder: budget symmetry is bit-exact") {
  const auto a = build_uniform_groups(4, UnitProbability(0.37), 23);
  const auto b = build_uniform_groups(4, UnitProbability(0.37), 23);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.groups[i].clean_mass == b.groups[i].clean_mass);
    CHECK(a.groups[i].adv_mass == b.groups[i].adv_mass);
  }
}

TEST_CASE("uniform builder: no silent overflow at large budgets") {
  const auto g = build_uniform_groups(64, UnitProbability(0.5), 1000);
  CHECK(std::abs(g.total_clean_mass() - 1.0) < 1e-12);
  CHECK(std::abs(g.total_adv_mass() - 1.0) < 1e-12);
  const auto g2 = build_uniform_groups(80, UnitProbability(0.5), 1000);
  CHECK(std::abs(g2.total_clean_mass() - 1.0) < 1e-10);
}

TEST_CASE("uniform builder: degenerate rates stay well formed") {
  const auto g0 = build_uniform_groups(2, UnitProbability(0.0), 5);
  REQUIRE(g0.size() == 1);
  CHECK(g0.groups[0].clean_mass == 1.0);
  CHECK(g0.groups[0].adv_mass == 0.0);
  const auto g1 = build_uniform_groups(2, UnitProbability(1.0), 5);
  CHECK(std::abs(g1.total_clean_mass() - 1.0) < 1e-12);
  // Certain corruption never keeps the center token, so the channels overlap
  // only where the sample avoids both centers.
  CHECK(std::abs(g1.total_adv_mass() - 0.5625) < 1e-12);
  CHECK_NOTHROW(g1.validate());
  KernelParams p;
  p.corruption_rate_beta = UnitProbability(0.0);
  CHECK(p.degenerate());
}

TEST_CASE("uniform builder rejects vocab < 2") {
  CHECK_THROWS_AS(build_uniform_groups(1, UnitProbability(0.5), 1),
                  ParameterError);
  CHECK_THROWS_AS(build_uniform_groups(-1, UnitProbability(0.5), 3),
                  ParameterError);
}

TEST_CASE("absorbing builder closed form") {
  const auto g0 = build_absorbing_groups(0, UnitProbability(0.5));
  REQUIRE(g0.size() == 1);
  CHECK(g0.is_trivial());

  const auto g1 = build_absorbing_groups(1, UnitProbability(0.5));
  REQUIRE(g1.size() == 2);
  CHECK(g1.groups[0].clean_mass == 0.5);
  CHECK(g1.groups[0].adv_mass == 0.0);
  CHECK(g1.groups[1].clean_mass == 0.5);
  CHECK(g1.groups[1].adv_mass == 0.5);

  const auto g3 = build_absorbing_groups(3, UnitProbability(0.5));
  REQUIRE(g3.size() == 2);
  CHECK(g3.groups[0].clean_mass == 0.875);
  CHECK(g3.groups[1].clean_mass == 0.125);
  CHECK(g3.groups[1].adv_mass == 0.125);
  // Sum of adversarial mass is exactly beta^d; the rest lies outside the
  // clean support.
  for (int d : {1, 2, 5, 8}) {
    for (double beta : {0.1, 0.5, 0.9}) {
      const auto g = build_absorbing_groups(d, UnitProbability(beta));
      CHECK(g.total_adv_mass() == std::pow(beta, d));
    }
  }
}

TEST_CASE("merge_and_sort merges ties and sorts") {
  GroupedLikelihoodRatio raw{{{0.5, 0.5}, {0.5, 0.5}}};
  const auto merged = merge_and_sort(raw);
  REQUIRE(merged.size() == 1);
  CHECK(merged.groups[0].clean_mass == 1.0);
  CHECK(merged.groups[0].adv_mass == 1.0);

  GroupedLikelihoodRatio perm{{{0.25, 0.5}, {0.5, 0.25}, {0.25, 0.25}}};
  const auto sorted = merge_and_sort(perm);
  REQUIRE(sorted.size() == 3);
  CHECK(sorted.groups[0].ratio() == doctest::Approx(0.5));
  CHECK(sorted.groups[1].ratio() == doctest::Approx(1.0));
  CHECK(sorted.groups[2].ratio() == doctest::Approx(2.0));
}

TEST_CASE("merge_and_sort is idempotent on builder output") {
  const auto g = build_uniform_groups(2, UnitProbability(0.25), 5);
  const auto again = merge_and_sort(g);
  REQUIRE(again.size() == g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    CHECK(again.groups[i].clean_mass == g.groups[i].clean_mass);
    CHECK(again.groups[i].adv_mass == g.groups[i].adv_mass);
  }
}

TEST_CASE("merge_and_sort rejects nonpositive clean mass") {
  GroupedLikelihoodRatio bad{{{0.0, 0.1}, {1.0, 0.9}}};
  CHECK_THROWS_AS(merge_and_sort(bad), ParameterError);
}

TEST_CASE("builders match exhaustive enumeration") {
  for (int d = 1; d <= 3; ++d) {
    for (int v = 2; v <= 4; ++v) {
      for (double beta : {0.1, 0.25, 0.5, 0.9}) {
        oracle::ToyDiscreteSpace space;
        space.vocab_size = v;
        space.clean_input.assign(d, 0);
        space.adversarial_input.assign(d, 1);

        KernelParams uniform{KernelKind::kUniform, UnitProbability(beta), v};
        const auto enum_u = oracle::enumerate_channel(space, uniform);
        const auto built_u = build_uniform_groups(d, UnitProbability(beta), v);
        REQUIRE(enum_u.size() == built_u.size());
        for (std::size_t i = 0; i < built_u.size(); ++i) {
          CHECK(std::abs(enum_u.groups[i].clean_mass -
                         built_u.groups[i].clean_mass) < 1e-12);
          CHECK(std::abs(enum_u.groups[i].adv_mass -
                         built_u.groups[i].adv_mass) < 1e-12);
        }

        KernelParams absorbing{KernelKind::kAbsorbing, UnitProbability(beta),
                               v};
        const auto enum_a = oracle::enumerate_channel(space, absorbing);
        const auto built_a = build_absorbing_groups(d, UnitProbability(beta));
        REQUIRE(enum_a.size() == built_a.size());
        for (std::size_t i = 0; i < built_a.size(); ++i) {
          CHECK(std::abs(enum_a.groups[i].clean_mass -
                         built_a.groups[i].clean_mass) < 1e-12);
          CHECK(std::abs(enum_a.groups[i].adv_mass -
                         built_a.groups[i].adv_mass) < 1e-12);
        }
      }
    }
  }
}

TEST_CASE("product of single-position channels equals the d=2 builder") {
  for (double beta : {0.25, 0.6}) {
    for (int v : {3, 6}) {
      const auto one = build_uniform_groups(1, UnitProbability(beta), v);
      const auto prod = product_channel(one, one);
      const auto two = build_uniform_groups(2, UnitProbability(beta), v);
      REQUIRE(prod.size() == two.size());
      for (std::size_t i = 0; i < two.size(); ++i) {
        CHECK(prod.groups[i].clean_mass ==
              doctest::Approx(two.groups[i].clean_mass).epsilon(1e-13));
        CHECK(prod.groups[i].adv_mass ==
              doctest::Approx(two.groups[i].adv_mass).epsilon(1e-13));
      }
    }
  }
}

TEST_CASE("threat model dispatch and family invariance") {
  KernelParams kernel{KernelKind::kUniform, UnitProbability(0.25), 11};
  const auto suffix =
      build_groups({ThreatFamily::kSuffixAppend, 2, kernel});
  const auto l0 = build_groups({ThreatFamily::kL0Replacement, 2, kernel});
  REQUIRE(suffix.size() == l0.size());
  for (std::size_t i = 0; i < suffix.size(); ++i) {
    CHECK(suffix.groups[i].clean_mass == l0.groups[i].clean_mass);
    CHECK(suffix.groups[i].adv_mass == l0.groups[i].adv_mass);
  }
}

TEST_CASE("groups serialize to the documented JSON shape") {
  const auto g = build_uniform_groups(1, UnitProbability(0.5), 3);
  const auto parsed = nlohmann::json::parse(groups_to_json(g));
  REQUIRE(parsed.is_array());
  REQUIRE(parsed.size() == 3);
  CHECK(parsed[0]["clean"].get<double>() ==
        doctest::Approx(0.5).epsilon(1e-14));
  CHECK(parsed[0]["adv"].get<double>() ==
        doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("random products keep mass accounting") {
  Rng rng(testseed::kKernelProperties);
  for (int trial = 0; trial < 200; ++trial) {
    const int v1 = 2 + rng.uniform_int(8);
    const int v2 = 2 + rng.uniform_int(8);
    const double b1 = rng.uniform(0.05, 0.95);
    const double b2 = rng.uniform(0.05, 0.95);
    const auto a = build_uniform_groups(1 + rng.uniform_int(2),
                                        UnitProbability(b1), v1);
    const auto b = build_uniform_groups(1 + rng.uniform_int(2),
                                        UnitProbability(b2), v2);
    const auto prod = product_channel(a, b);
    CHECK(std::abs(prod.total_clean_mass() - 1.0) < 1e-12);
    CHECK(std::abs(prod.total_adv_mass() - 1.0) < 1e-12);
    CHECK_NOTHROW(prod.validate());
  }
}
