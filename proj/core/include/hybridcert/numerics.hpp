#pragma once

#include <functional>

#include "hybridcert/errors.hpp"

namespace hybridcert {

// A probability validated to [0, 1] at construction.
class UnitProbability {
 public:
  UnitProbability() = default;
  explicit UnitProbability(double value);
  double value() const { return value_; }

 private:
  double value_ = 0.0;
};

// Clamps a value that is within `slack` outside [0, 1] (accumulated rounding
// in sums of probabilities) back onto the unit interval. Anything farther out
// is a logic error and throws.
UnitProbability clamp_unit(double value, double slack = 1e-9);

double std_normal_pdf(double x);

// Standard normal CDF. Absolute error <= 1e-12 for |x| <= 8 and full relative
// accuracy in the lower tail, which the certificate needs at thresholds of
// order 1e-5 and below. NaN input throws.
UnitProbability std_normal_cdf(double x);

// log(Phi(x)) without underflow; switches to the asymptotic tail expansion
// once Phi itself would lose relative precision.
double log_std_normal_cdf(double x);

// Inverse of std_normal_cdf for p in (0, 1): rational initial estimate plus
// Halley refinement against the implemented CDF, so the pair is
// self-consistent. |Phi(result) - p| <= 1e-12. p in {0, 1} throws
// UnboundedQuantileError.
double std_normal_quantile(UnitProbability p);

enum class BracketSide {
  kLowerBracket,  // returned point evaluates <= target
  kUpperBracket,  // returned point evaluates >= target
};

struct BisectionSpec {
  double lower = 0.0;
  double upper = 1.0;
  double tolerance = 1e-9;
  int max_iterations = 64;

  // Derives max_iterations = ceil(log2((upper - lower) / (2 * tolerance))),
  // the halving count that shrinks the bracket to width 2 * tolerance.
  static BisectionSpec from_tolerance(double lower, double upper,
                                      double tolerance);
};

struct BisectionResult {
  double value = 0.0;
  int iterations = 0;  // interval halvings performed
  double bracket_lo = 0.0;
  double bracket_hi = 0.0;
};

// Bisection on a nondecreasing fn. Returns a point within spec.tolerance of
// the crossing fn(x) = target, one-sided per `side`: the returned point's own
// evaluation satisfies the side inequality, so tolerance can only shrink a
// downstream certificate, never inflate it. If the initial bracket does not
// straddle the target it is expanded geometrically (factor 2, at most 200
// doublings) before giving up with BracketError.
BisectionResult bisect_monotone(const std::function<double(double)>& fn,
                                double target, const BisectionSpec& spec,
                                BracketSide side);

// Test-only fault injection: adds `offset` to every std_normal_cdf result
// (clamped to [0, 1]). Lets the oracle checks demonstrate they catch a
// corrupted CDF. Zero disables; never set in production paths.
void set_cdf_fault_for_testing(double offset);
double cdf_fault_for_testing();

}  // namespace hybridcert
