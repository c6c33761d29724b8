#include "hybridcert/confidence.hpp"

#include <algorithm>
#include <cmath>

namespace hybridcert {
namespace {

double log_binomial_coeff(std::int64_t n, std::int64_t k) {
  return std::lgamma(static_cast<double>(n) + 1.0) -
         std::lgamma(static_cast<double>(k) + 1.0) -
         std::lgamma(static_cast<double>(n - k) + 1.0);
}

// Sums pmf(j) for j = start, start +/- 1, ... while terms still matter,
// anchored in log space at the first term. `step` is +1 for the upper
// direction and -1 for the lower.
double directional_sum(std::int64_t n, std::int64_t start, int step, double p) {
  const double log_p = std::log(p);
  const double log_q = std::log1p(-p);
  const double log_first = log_binomial_coeff(n, start) +
                           static_cast<double>(start) * log_p +
                           static_cast<double>(n - start) * log_q;
  const double first = std::exp(log_first);
  if (first == 0.0) return 0.0;
  double sum = 1.0;  // in units of the first term
  double term = 1.0;
  std::int64_t j = start;
  while (true) {
    const std::int64_t next = j + step;
    if (next < 0 || next > n) break;
    // pmf(j+1)/pmf(j) = (n-j)/(j+1) * p/q
    double ratio;
    if (step > 0) {
      ratio = static_cast<double>(n - j) / static_cast<double>(j + 1) * p /
              (1.0 - p);
    } else {
      ratio = static_cast<double>(j) / static_cast<double>(n - j + 1) *
              (1.0 - p) / p;
    }
    term *= ratio;
    sum += term;
    if (term < 1e-18 * sum) break;
    j = next;
  }
  return first * sum;
}

}  // namespace

double binomial_upper_tail(std::int64_t n, std::int64_t k, double p) {
  if (n < 1 || k < 0 || k > n) {
    throw ParameterError("binomial_upper_tail: need 0 <= k <= n, n >= 1");
  }
  if (k == 0) return 1.0;
  if (p <= 0.0) return 0.0;
  if (p >= 1.0) return 1.0;
  // Sum whichever tail has decaying terms from its anchor.
  const double mean = static_cast<double>(n) * p;
  if (static_cast<double>(k) >= mean) {
    return std::min(1.0, directional_sum(n, k, +1, p));
  }
  return std::max(0.0, 1.0 - directional_sum(n, k - 1, -1, p));
}

UnitProbability clopper_pearson_lower(const MonteCarloEstimate& est) {
  const std::int64_t n = est.samples_n;
  const std::int64_t k = est.successes_k;
  const double alpha = est.risk_alpha.value();
  if (n < 1) {
    throw ParameterError("clopper_pearson_lower: samples_n must be >= 1");
  }
  if (k < 0 || k > n) {
    throw ParameterError("clopper_pearson_lower: need 0 <= k <= n");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ParameterError("clopper_pearson_lower: alpha must be in (0, 1)");
  }
  if (k == 0) {
    return UnitProbability(0.0);
  }
  if (k == n) {
    return UnitProbability(std::pow(alpha, 1.0 / static_cast<double>(n)));
  }

  constexpr double kTol = 1e-12;
  const auto tail = [n, k](double p) { return binomial_upper_tail(n, k, p); };
  const auto spec = BisectionSpec::from_tolerance(0.0, 1.0, kTol);
  const BisectionResult res =
      bisect_monotone(tail, alpha, spec, BracketSide::kLowerBracket);
  // Nudge down by the tolerance so rounding cannot push the bound past the
  // exact solution.
  return UnitProbability(std::max(0.0, res.value - kTol));
}

}  // namespace hybridcert
