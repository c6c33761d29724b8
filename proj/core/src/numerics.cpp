#include "hybridcert/numerics.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <string>

namespace hybridcert {
namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kSqrt2Pi = 2.50662827463100050242;
constexpr double kLogSqrt2Pi = 0.91893853320467274178;

std::atomic<double> g_cdf_fault{0.0};

// Rational initial estimate for the normal quantile (P. Acklam's
// approximation, |relative error| < 1.15e-9 over (0, 1)). Refined afterwards
// against the implemented CDF.
double quantile_initial(double p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
            c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - p_low) {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
             c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r +
          a[5]) *
         q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace

UnitProbability::UnitProbability(double value) : value_(value) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw ParameterError("UnitProbability: value " + std::to_string(value) +
                         " outside [0, 1]");
  }
}

UnitProbability clamp_unit(double value, double slack) {
  if (std::isnan(value) || value < -slack || value > 1.0 + slack) {
    throw NumericError("clamp_unit: value " + std::to_string(value) +
                       " not within slack of [0, 1]");
  }
  if (value < 0.0) value = 0.0;
  if (value > 1.0) value = 1.0;
  return UnitProbability(value);
}

double std_normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / kSqrt2Pi;
}

UnitProbability std_normal_cdf(double x) {
  if (std::isnan(x)) {
    throw ParameterError("std_normal_cdf: NaN input");
  }
  // erfc keeps relative accuracy in the lower tail; the reflection handles
  // both signs in one expression.
  double v = 0.5 * std::erfc(-x * kInvSqrt2);
  const double fault = g_cdf_fault.load(std::memory_order_relaxed);
  if (fault != 0.0) {
    v += fault;
    if (v < 0.0) v = 0.0;
    if (v > 1.0) v = 1.0;
  }
  return UnitProbability(v);
}

double log_std_normal_cdf(double x) {
  if (std::isnan(x)) {
    throw ParameterError("log_std_normal_cdf: NaN input");
  }
  if (x >= -36.0) {
    return std::log(std_normal_cdf(x).value());
  }
  // Asymptotic expansion Phi(x) = pdf(x)/(-x) * (1 - 1/x^2 + 3/x^4 - ...),
  // accurate to ~1e-13 relative for x <= -36 where erfc has already lost its
  // footing.
  const double x2 = x * x;
  double series = 0.0;
  double term = 1.0;  // (2k-1)!! / x^(2k)
  double sign = -1.0;
  for (int k = 1; k <= 6; ++k) {
    term *= (2.0 * k - 1.0) / x2;
    series += sign * term;
    sign = -sign;
  }
  return -0.5 * x2 - std::log(-x) - kLogSqrt2Pi + std::log1p(series);
}

double std_normal_quantile(UnitProbability p) {
  const double pv = p.value();
  if (pv == 0.0 || pv == 1.0) {
    throw UnboundedQuantileError("std_normal_quantile: p in {0, 1}");
  }
  double x = quantile_initial(pv);
  // Halley refinement against the implemented CDF; two steps pin the pair to
  // self-consistency at machine precision.
  for (int i = 0; i < 2; ++i) {
    const double err = std_normal_cdf(x).value() - pv;
    const double u = err * kSqrt2Pi * std::exp(0.5 * x * x);
    if (!std::isfinite(u)) break;
    x -= u / (1.0 + 0.5 * x * u);
  }
  return x;
}

BisectionSpec BisectionSpec::from_tolerance(double lower, double upper,
                                            double tolerance) {
  if (!(tolerance > 0.0) || !std::isfinite(tolerance)) {
    throw ParameterError("BisectionSpec: tolerance must be positive");
  }
  if (!(lower < upper) || !std::isfinite(lower) || !std::isfinite(upper)) {
    throw ParameterError("BisectionSpec: need finite lower < upper");
  }
  const double width = upper - lower;
  int iters = 0;
  if (width > 2.0 * tolerance) {
    iters = static_cast<int>(std::ceil(std::log2(width / (2.0 * tolerance))));
  }
  return BisectionSpec{lower, upper, tolerance, iters};
}

BisectionResult bisect_monotone(const std::function<double(double)>& fn,
                                double target, const BisectionSpec& spec,
                                BracketSide side) {
  if (!std::isfinite(target)) {
    throw ParameterError("bisect_monotone: non-finite target");
  }
  if (!(spec.lower < spec.upper) || !std::isfinite(spec.lower) ||
      !std::isfinite(spec.upper)) {
    throw ParameterError("bisect_monotone: need finite lower < upper");
  }
  if (!(spec.tolerance > 0.0)) {
    throw ParameterError("bisect_monotone: tolerance must be positive");
  }
  if (spec.max_iterations < 0) {
    throw ParameterError("bisect_monotone: max_iterations must be >= 0");
  }

  const auto eval = [&fn](double x) {
    const double v = fn(x);
    if (std::isnan(v)) {
      throw NumericError("bisect_monotone: fn returned NaN");
    }
    return v;
  };

  double a = spec.lower;
  double b = spec.upper;
  double fa = eval(a);
  double fb = eval(b);

  // Geometric bracket expansion when the inputs do not straddle the target.
  // The crossing location is input-dependent; callers often only know a
  // plausible window.
  int doublings = 0;
  while (fa > target && doublings < 200) {
    const double width = b - a;
    a -= width;
    if (!std::isfinite(a)) break;
    fa = eval(a);
    ++doublings;
  }
  while (fb < target && doublings < 200) {
    const double width = b - a;
    b += width;
    if (!std::isfinite(b)) break;
    fb = eval(b);
    ++doublings;
  }
  if (fa > target || fb < target) {
    throw BracketError("bisect_monotone: bracket does not straddle target");
  }

  // With an expanded bracket the derived iteration budget no longer reaches
  // the tolerance; extend it accordingly.
  int budget = spec.max_iterations;
  if (doublings > 0) {
    budget = BisectionSpec::from_tolerance(a, b, spec.tolerance).max_iterations;
    if (budget < spec.max_iterations) budget = spec.max_iterations;
  }

  int iters = 0;
  while ((b - a) > 2.0 * spec.tolerance && iters < budget) {
    const double m = a + 0.5 * (b - a);
    if (m <= a || m >= b) break;  // bracket at floating-point resolution
    const double fm = eval(m);
    if (fm <= target) {
      a = m;
    } else {
      b = m;
    }
    ++iters;
  }

  // Final probe: the midpoint of the 2*tolerance-wide bracket is within
  // tolerance of the crossing; fall back to the side endpoint when the probe
  // lands on the wrong side.
  BisectionResult result;
  result.iterations = iters;
  result.bracket_lo = a;
  result.bracket_hi = b;
  const double m = a + 0.5 * (b - a);
  if (m > a && m < b) {
    const double fm = eval(m);
    if (side == BracketSide::kLowerBracket) {
      result.value = (fm <= target) ? m : a;
    } else {
      result.value = (fm >= target) ? m : b;
    }
  } else {
    result.value = (side == BracketSide::kLowerBracket) ? a : b;
  }
  return result;
}

void set_cdf_fault_for_testing(double offset) {
  g_cdf_fault.store(offset, std::memory_order_relaxed);
}

double cdf_fault_for_testing() {
  return g_cdf_fault.load(std::memory_order_relaxed);
}

}  // namespace hybridcert
