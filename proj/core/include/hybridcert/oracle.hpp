#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hybridcert/kernels.hpp"
#include "hybridcert/numerics.hpp"

namespace hybridcert::oracle {

// A fully enumerable discrete space: every noise outcome of the kernel can be
// listed and weighed exactly.
struct ToyDiscreteSpace {
  int vocab_size = 2;                // <= 6
  std::vector<int> clean_input;      // length <= 4, tokens in [0, vocab_size)
  std::vector<int> adversarial_input;
};

// PAD token id used by the absorbing kernel in toy enumeration; it lives
// outside the regular vocabulary.
inline constexpr int kPadToken = -1;

// Exact grouped representation obtained by enumerating all vocab^length
// noise outcomes and weighing each by its product of per-position kernel
// probabilities. Ground truth for the grouped builders.
GroupedLikelihoodRatio enumerate_channel(const ToyDiscreteSpace& space,
                                         const KernelParams& kernel);

// Normal CDF on an independent evaluation path: adaptive Simpson quadrature
// of the density for |x| <= 8 and a continued-fraction tail beyond. Shares
// nothing with the erfc-based implementation it is used to check.
double oracle_normal_cdf(double x);

// Hybrid NP value computed against the proof's one-dimensional projection:
// dense grid plus local bisection for the threshold over the mixture CDF,
// all probabilities through oracle_normal_cdf.
UnitProbability quadrature_np_value(const GroupedLikelihoodRatio& groups,
                                    double sigma, double radius_r,
                                    UnitProbability p_a);

struct MonteCarloCheck {
  double clean_estimate = 0.0;
  double adv_estimate = 0.0;
  double clean_std_error = 0.0;
  double adv_std_error = 0.0;
};

// Samples the sufficient statistic of the optimal test under both channels
// and returns the empirical acceptance rates (against F and V). Deterministic
// per seed.
MonteCarloCheck monte_carlo_verify(const GroupedLikelihoodRatio& groups,
                                   double sigma, double radius_r,
                                   double t_threshold, std::int64_t n_samples,
                                   std::uint64_t seed);

// Independent fractional-knapsack evaluation: explicit sort plus compensated
// prefix accumulation. Must agree with certificate::knapsack_value to 1e-12.
UnitProbability knapsack_reference(const GroupedLikelihoodRatio& groups,
                                   UnitProbability p_a);

// Explicit absorbing-kernel certificate quantities; the second algebraic
// route checked against the generic grouped solver.
struct AbsorbingReference {
  bool degenerate = false;
  double log_t_star = 0.0;
  double value = 0.0;
};
AbsorbingReference absorbing_reference(int budget_d, double beta, double p_a,
                                       double sigma, double radius_r);

struct CheckResult {
  std::string name;
  bool passed = false;
  double max_deviation = 0.0;
  std::string detail;
};

struct VerificationOptions {
  std::int64_t mc_samples = 100000;
  int mc_configs = 200;
  std::uint64_t seed = 20240901;
};

struct VerificationReport {
  std::vector<CheckResult> checks;
  bool all_passed() const;
};

// The full cross-check grid: enumeration vs builders, quadrature vs engine,
// Monte Carlo vs closed forms, and the two knapsack implementations.
VerificationReport run_verification(const VerificationOptions& options);

}  // namespace hybridcert::oracle
