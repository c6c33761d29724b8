#pragma once

#include <cstdint>

#include "hybridcert/numerics.hpp"

namespace hybridcert {

struct MonteCarloEstimate {
  std::int64_t samples_n = 0;
  std::int64_t successes_k = 0;
  UnitProbability risk_alpha{0.05};
};

// P[Bin(n, p) >= k], evaluated in log space so it survives n up to 1e6.
double binomial_upper_tail(std::int64_t n, std::int64_t k, double p);

// One-sided Clopper-Pearson lower bound: the largest p_L with
// P[Bin(n, p_L) >= k] <= alpha. k = 0 gives 0, k = n gives alpha^(1/n)
// exactly; otherwise monotone bisection on the tail, with the result nudged
// down by the bisection tolerance so floating error cannot break
// one-sidedness. Satisfies P[p_L <= true p] >= 1 - alpha.
UnitProbability clopper_pearson_lower(const MonteCarloEstimate& est);

}  // namespace hybridcert
