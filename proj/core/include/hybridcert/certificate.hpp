#pragma once

#include <vector>

#include "hybridcert/kernels.hpp"
#include "hybridcert/numerics.hpp"

namespace hybridcert {

// One hybrid Neyman-Pearson instance: a lower confidence bound on the clean
// smoothed score, the Gaussian smoothing scale, the discrete channel summary,
// and the continuous perturbation magnitude.
struct HybridProblem {
  UnitProbability p_a_lower;
  double sigma = 1.0;
  GroupedLikelihoodRatio groups;
  double radius_r = 0.0;
};

struct CertificateResult {
  double certified_radius = 0.0;  // lower bound on the true radius
  int budget_d = 0;
  UnitProbability threshold_tau;
  double radius_tolerance = 0.0;
  double threshold_tolerance = 0.0;
  bool certified = false;
  UnitProbability worst_case_value_at_radius;
  // Feasible all the way out to r_max; the reported radius is the search
  // bound, not a crossing.
  bool bracket_limited = false;
};

inline constexpr double kDefaultThresholdTolerance = 1e-9;  // in log t
inline constexpr double kDefaultRadiusTolerance = 1e-4;     // input units

inline double default_r_max(double sigma) { return 50.0 * sigma; }

// Capacity function F(t; r): clean-channel probability that the joint
// likelihood ratio is <= t at continuous shift r. Sum over groups of
// clean_g * Phi((r^2/2 + sigma^2 (log t - log ratio_g)) / (sigma r));
// ratio-zero groups contribute their full clean mass. Strictly increasing in
// t with range [m0, 1), m0 the ratio-zero clean mass. Requires t > 0 and
// radius_r > 0 (at r = 0 the capacity is a staircase; use the knapsack path).
UnitProbability capacity_F(double t, const HybridProblem& problem);

// Lower bracket t_L <= t* for the threshold solving F(t*; r) = p_A, within
// `tolerance` of t* in the log domain. Guarantees F(t_L; r) <= p_A as
// evaluated, so the downstream value is conservative. Throws
// DegenerateCertificateError when p_A does not exceed the ratio-zero mass.
double solve_threshold(const HybridProblem& problem, double tolerance);

// Worst-case smoothed probability under the optimal test at threshold t:
// sum over groups of adv_g * Phi(arg_g - r/sigma). Nondecreasing in t.
UnitProbability adversarial_value(const HybridProblem& problem,
                                  double t_threshold);

// Discrete-only worst case: accept clean mass in ascending ratio order until
// p_a is exhausted, fractionally at the boundary group; the value is the
// accepted adversarial mass. Equals the sigma -> infinity limit of the hybrid
// value.
UnitProbability knapsack_value(const GroupedLikelihoodRatio& groups,
                               UnitProbability p_a);

// Certified lower bound on the worst-case smoothed probability at continuous
// radius `radius_r` and the discrete channel `groups`. Dispatches:
//   radius 0            -> knapsack_value
//   trivial channel     -> Phi(Phi^-1(p_A) - r/sigma)
//   p_A <= ratio-0 mass -> 0 (degenerate; no certificate possible)
//   otherwise           -> adversarial_value at the lower-bracketed threshold
UnitProbability worst_case_value(
    UnitProbability p_a_lower, double sigma,
    const GroupedLikelihoodRatio& groups, double radius_r,
    double threshold_tolerance = kDefaultThresholdTolerance);

// Largest radius r_hat (found by conservative outer bisection on [0, r_max])
// such that the worst-case value stays above tau. Guarantees
// r_hat <= r_star and r_star - r_hat <= radius_tolerance whenever
// r_star < r_max; if feasible at r_max the result is flagged bracket_limited.
CertificateResult certified_radius(
    UnitProbability p_a_lower, double sigma,
    const GroupedLikelihoodRatio& groups, UnitProbability tau,
    double radius_tolerance = kDefaultRadiusTolerance,
    double threshold_tolerance = kDefaultThresholdTolerance,
    double r_max = 0.0,  // 0 -> default_r_max(sigma)
    int budget_d = 0);

struct FrontierEntry {
  int budget_d = 0;
  CertificateResult result;
};

// One certificate per discrete budget using the canonical symmetric
// adversary; entry order follows d_values.
std::vector<FrontierEntry> frontier(
    UnitProbability p_a_lower, double sigma, const KernelParams& kernel,
    ThreatFamily family, const std::vector<int>& d_values, UnitProbability tau,
    double radius_tolerance = kDefaultRadiusTolerance,
    double threshold_tolerance = kDefaultThresholdTolerance,
    double r_max = 0.0);

}  // namespace hybridcert
