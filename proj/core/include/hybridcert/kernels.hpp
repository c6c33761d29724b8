#pragma once

#include <string>
#include <vector>

#include "hybridcert/numerics.hpp"

namespace hybridcert {

enum class KernelKind { kUniform, kAbsorbing };
enum class ThreatFamily { kSuffixAppend, kL0Replacement };

// Per-position discrete smoothing kernel. `vocab_size` only applies to the
// uniform kernel (replacement is uniform over the V-1 other tokens).
struct KernelParams {
  KernelKind kind = KernelKind::kUniform;
  UnitProbability corruption_rate_beta{0.25};
  int vocab_size = 2;

  // beta in {0, 1} collapses one of the two channels onto a point mass.
  bool degenerate() const {
    const double b = corruption_rate_beta.value();
    return b == 0.0 || b == 1.0;
  }
};

// Discrete attack family plus budget. Under the symmetric kernels supported
// here the canonical grouped representation depends only on the budget; the
// family is metadata that decides which positions are eligible (appended
// positions are embedded as replacements of PAD tokens in the padded space).
struct ThreatModel {
  ThreatFamily family = ThreatFamily::kSuffixAppend;
  int budget_d = 0;
  KernelParams kernel;
};

// One likelihood-ratio class: clean-channel mass and adversarial-channel mass
// of all noise outcomes sharing the ratio adv/clean. clean_mass > 0 always;
// adv_mass = 0 encodes outcomes the adversarial channel cannot produce.
struct RatioGroup {
  double clean_mass = 0.0;
  double adv_mass = 0.0;
  double ratio() const { return adv_mass / clean_mass; }
};

// Finite summary of a discrete channel pair: groups sorted by strictly
// increasing ratio, clean masses summing to 1 (within 1e-12). Adversarial
// masses may sum to less than 1 when part of the adversarial support has zero
// clean probability (absorbing kernels); that mass is certifiably ignorable
// because the optimal test rejects wherever the clean density vanishes.
struct GroupedLikelihoodRatio {
  std::vector<RatioGroup> groups;

  std::size_t size() const { return groups.size(); }
  double total_clean_mass() const;
  double total_adv_mass() const;
  // Clean mass sitting at likelihood ratio zero.
  double ratio_zero_mass() const;
  // Single group with ratio 1: the discrete channel is invisible to the test.
  bool is_trivial() const;
  // Enforces the type invariants; throws ParameterError on violation.
  void validate() const;
};

// Merges groups whose ratios agree to relative 1e-12 and sorts ascending by
// ratio. Masses are accumulated with compensated summation.
GroupedLikelihoodRatio merge_and_sort(const GroupedLikelihoodRatio& raw);

// Canonical worst-case representation for an adversary differing from the
// clean input in exactly d positions under per-position uniform replacement.
// Group (i, j) counts outcomes differing from the clean input in i and from
// the adversarial input in j of the d positions; the grid has O(d^2) cells
// and collapses to at most 2d+1 distinct ratios.
GroupedLikelihoodRatio build_uniform_groups(int budget_d,
                                            UnitProbability beta,
                                            int vocab_size);

// Absorbing (PAD-replacement) kernel: two groups, mass 1 - beta^d at ratio 0
// and beta^d at ratio 1.
GroupedLikelihoodRatio build_absorbing_groups(int budget_d,
                                              UnitProbability beta);

// Dispatch on the threat model's kernel kind.
GroupedLikelihoodRatio build_groups(const ThreatModel& threat);

// Product of two independent channels: masses multiply, ratios multiply.
GroupedLikelihoodRatio product_channel(const GroupedLikelihoodRatio& a,
                                       const GroupedLikelihoodRatio& b);

// JSON array of {"clean": ..., "adv": ...} records (the --dump-groups wire
// format).
std::string groups_to_json(const GroupedLikelihoodRatio& groups);

}  // namespace hybridcert
