#include "hybridcert/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>

#include "nlohmann/json.hpp"

namespace hybridcert {
namespace {

constexpr double kMassTolerance = 1e-12;
constexpr double kRatioTieTolerance = 1e-12;

struct KahanSum {
  double sum = 0.0;
  double carry = 0.0;
  void add(double x) {
    const double y = x - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
};

// Exact integer binomial for n <= 64 (C(64, 32) < 2^63); the multiplicative
// loop needs a 128-bit intermediate.
double log_binomial(int n, int k) {
  if (k < 0 || k > n) return -std::numeric_limits<double>::infinity();
  if (k == 0 || k == n) return 0.0;
  if (n <= 64) {
    unsigned __int128 r = 1;
    const int kk = std::min(k, n - k);
    for (int i = 1; i <= kk; ++i) {
      r = r * static_cast<unsigned __int128>(n - kk + i) /
          static_cast<unsigned __int128>(i);
    }
    return std::log(static_cast<double>(static_cast<std::uint64_t>(r)));
  }
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

// x * log(y) with the convention 0 * log(0) = 0, so zero-probability factors
// drop out instead of producing NaN.
double xlog(int x, double log_y) {
  return (x == 0) ? 0.0 : x * log_y;
}

bool ratios_tie(double r1, double r2) {
  if (r1 == r2) return true;
  return std::abs(r1 - r2) <= kRatioTieTolerance * std::max(r1, r2);
}

}  // namespace

double GroupedLikelihoodRatio::total_clean_mass() const {
  KahanSum s;
  for (const auto& g : groups) s.add(g.clean_mass);
  return s.sum;
}

double GroupedLikelihoodRatio::total_adv_mass() const {
  KahanSum s;
  for (const auto& g : groups) s.add(g.adv_mass);
  return s.sum;
}

double GroupedLikelihoodRatio::ratio_zero_mass() const {
  KahanSum s;
  for (const auto& g : groups) {
    if (g.adv_mass == 0.0) s.add(g.clean_mass);
  }
  return s.sum;
}

bool GroupedLikelihoodRatio::is_trivial() const {
  return groups.size() == 1 && groups.front().clean_mass > 0.0 &&
         ratios_tie(groups.front().ratio(), 1.0);
}

void GroupedLikelihoodRatio::validate() const {
  if (groups.empty()) {
    throw ParameterError("GroupedLikelihoodRatio: no groups");
  }
  for (const auto& g : groups) {
    if (!(g.clean_mass > 0.0) || !std::isfinite(g.clean_mass)) {
      throw ParameterError("GroupedLikelihoodRatio: clean mass must be > 0");
    }
    if (g.adv_mass < 0.0 || !std::isfinite(g.adv_mass)) {
      throw ParameterError("GroupedLikelihoodRatio: adv mass must be >= 0");
    }
  }
  for (std::size_t i = 1; i < groups.size(); ++i) {
    if (!(groups[i - 1].ratio() < groups[i].ratio())) {
      throw ParameterError(
          "GroupedLikelihoodRatio: ratios not strictly increasing");
    }
  }
  if (std::abs(total_clean_mass() - 1.0) > kMassTolerance) {
    throw ParameterError("GroupedLikelihoodRatio: clean masses must sum to 1");
  }
  if (total_adv_mass() > 1.0 + kMassTolerance) {
    throw ParameterError("GroupedLikelihoodRatio: adv masses exceed 1");
  }
}

GroupedLikelihoodRatio merge_and_sort(const GroupedLikelihoodRatio& raw) {
  if (raw.groups.empty()) {
    throw ParameterError("merge_and_sort: no groups");
  }
  std::vector<RatioGroup> sorted = raw.groups;
  for (const auto& g : sorted) {
    if (!(g.clean_mass > 0.0)) {
      throw ParameterError("merge_and_sort: clean mass must be > 0");
    }
    if (g.adv_mass < 0.0) {
      throw ParameterError("merge_and_sort: adv mass must be >= 0");
    }
  }
  std::sort(sorted.begin(), sorted.end(),
            [](const RatioGroup& a, const RatioGroup& b) {
              return a.ratio() < b.ratio();
            });

  GroupedLikelihoodRatio out;
  KahanSum clean;
  KahanSum adv;
  double head_ratio = sorted.front().ratio();
  for (const auto& g : sorted) {
    if (!ratios_tie(head_ratio, g.ratio())) {
      out.groups.push_back({clean.sum, adv.sum});
      clean = KahanSum{};
      adv = KahanSum{};
      head_ratio = g.ratio();
    }
    clean.add(g.clean_mass);
    adv.add(g.adv_mass);
  }
  out.groups.push_back({clean.sum, adv.sum});
  return out;
}

GroupedLikelihoodRatio build_uniform_groups(int budget_d, UnitProbability beta,
                                            int vocab_size) {
  if (vocab_size < 2) {
    throw ParameterError("build_uniform_groups: vocab_size must be >= 2");
  }
  if (budget_d < 0) {
    throw ParameterError("build_uniform_groups: budget must be >= 0");
  }
  if (budget_d == 0) {
    return GroupedLikelihoodRatio{{{1.0, 1.0}}};
  }
  const int d = budget_d;
  const double b = beta.value();
  const double alpha = b / (vocab_size - 1);
  const double log_alpha = std::log(alpha);    // -inf when beta == 0
  const double log_bbar = std::log1p(-b);      // -inf when beta == 1
  const double log_vm2 = (vocab_size > 2)
                             ? std::log(static_cast<double>(vocab_size - 2))
                             : -std::numeric_limits<double>::infinity();

  // Outcomes at the d differing positions, classed by i = #positions away
  // from the clean input and j = #positions away from the adversarial input;
  // c = i + j - d of them differ from both.
  GroupedLikelihoodRatio raw;
  for (int i = 0; i <= d; ++i) {
    for (int j = d - i; j <= d; ++j) {
      const int c = i + j - d;
      const int shared_adv = i - c;  // positions where the outcome equals the
                                     // adversarial token
      if (vocab_size == 2 && c > 0) continue;  // no third token to land on
      const double log_n =
          log_binomial(d, i) + log_binomial(i, shared_adv) + xlog(c, log_vm2);
      const double log_clean = log_n + xlog(i, log_alpha) + xlog(d - i, log_bbar);
      const double log_adv = log_n + xlog(j, log_alpha) + xlog(d - j, log_bbar);
      const double clean = std::exp(log_clean);
      if (clean <= 0.0) continue;  // outside clean support
      const double adv = std::exp(log_adv);
      raw.groups.push_back({clean, adv});
    }
  }
  return merge_and_sort(raw);
}

GroupedLikelihoodRatio build_absorbing_groups(int budget_d,
                                              UnitProbability beta) {
  if (budget_d < 0) {
    throw ParameterError("build_absorbing_groups: budget must be >= 0");
  }
  if (budget_d == 0) {
    return GroupedLikelihoodRatio{{{1.0, 1.0}}};
  }
  const double keep = std::pow(beta.value(), budget_d);  // all d positions PAD
  GroupedLikelihoodRatio out;
  if (keep < 1.0) {
    out.groups.push_back({1.0 - keep, 0.0});
  }
  if (keep > 0.0) {
    out.groups.push_back({keep, keep});
  }
  return out;
}

GroupedLikelihoodRatio build_groups(const ThreatModel& threat) {
  // Both families reduce to the same canonical channel at a given budget;
  // the family only decides which positions are eligible when sampling.
  switch (threat.kernel.kind) {
    case KernelKind::kUniform:
      return build_uniform_groups(threat.budget_d,
                                  threat.kernel.corruption_rate_beta,
                                  threat.kernel.vocab_size);
    case KernelKind::kAbsorbing:
      return build_absorbing_groups(threat.budget_d,
                                    threat.kernel.corruption_rate_beta);
  }
  throw ParameterError("build_groups: unknown kernel kind");
}

GroupedLikelihoodRatio product_channel(const GroupedLikelihoodRatio& a,
                                       const GroupedLikelihoodRatio& b) {
  GroupedLikelihoodRatio raw;
  raw.groups.reserve(a.groups.size() * b.groups.size());
  for (const auto& ga : a.groups) {
    for (const auto& gb : b.groups) {
      raw.groups.push_back(
          {ga.clean_mass * gb.clean_mass, ga.adv_mass * gb.adv_mass});
    }
  }
  return merge_and_sort(raw);
}

std::string groups_to_json(const GroupedLikelihoodRatio& groups) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& g : groups.groups) {
    arr.push_back({{"clean", g.clean_mass}, {"adv", g.adv_mass}});
  }
  return arr.dump();
}

}  // namespace hybridcert
