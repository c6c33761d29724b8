#include "hybridcert/certificate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace hybridcert {
namespace {

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

// Precomputed per-group log ratios for the capacity/value sums. Ratio-zero
// groups are kept separate: they add a constant m0 to F and nothing to V.
struct PreparedProblem {
  double sigma = 0.0;
  double r = 0.0;
  double m0 = 0.0;
  std::vector<double> clean;
  std::vector<double> adv;
  std::vector<double> log_ratio;

  // F as a function of u = log t.
  double capacity_at(double u) const {
    KahanSum acc;
    acc.add(m0);
    const double half_shift = 0.5 * r / sigma;
    const double slope = sigma / r;
    for (std::size_t g = 0; g < clean.size(); ++g) {
      const double arg = half_shift + slope * (u - log_ratio[g]);
      acc.add(clean[g] * std_normal_cdf(arg).value());
    }
    return acc.sum;
  }

  double value_at(double u) const {
    KahanSum acc;
    const double half_shift = 0.5 * r / sigma;
    const double slope = sigma / r;
    const double shift = r / sigma;
    for (std::size_t g = 0; g < clean.size(); ++g) {
      const double arg = half_shift + slope * (u - log_ratio[g]) - shift;
      acc.add(adv[g] * std_normal_cdf(arg).value());
    }
    return acc.sum;
  }
};

PreparedProblem prepare(const HybridProblem& problem) {
  if (!(problem.sigma > 0.0) || !std::isfinite(problem.sigma)) {
    throw ParameterError("hybrid problem: sigma must be positive");
  }
  if (!(problem.radius_r > 0.0) || !std::isfinite(problem.radius_r)) {
    throw ParameterError(
        "hybrid problem: radius must be positive; use the knapsack path at "
        "radius 0");
  }
  problem.groups.validate();
  PreparedProblem prep;
  prep.sigma = problem.sigma;
  prep.r = problem.radius_r;
  for (const auto& g : problem.groups.groups) {
    if (g.adv_mass == 0.0) {
      prep.m0 += g.clean_mass;
      continue;
    }
    prep.clean.push_back(g.clean_mass);
    prep.adv.push_back(g.adv_mass);
    prep.log_ratio.push_back(std::log(g.ratio()));
  }
  return prep;
}

// Initial log-t bracket: wide enough that every group's Phi argument reaches
// +/-40 at the endpoints, so F spans (m0, 1) across it for any admissible
// p_A. bisect_monotone's geometric expansion backstops pathological inputs.
void log_threshold_bracket(const PreparedProblem& prep, double* lo,
                           double* hi) {
  const double min_lr =
      *std::min_element(prep.log_ratio.begin(), prep.log_ratio.end());
  const double max_lr =
      *std::max_element(prep.log_ratio.begin(), prep.log_ratio.end());
  const double margin =
      (40.0 * prep.sigma * prep.r + 0.5 * prep.r * prep.r) /
      (prep.sigma * prep.sigma);
  *lo = min_lr - margin;
  *hi = max_lr + margin;
}

double solve_threshold_impl(const PreparedProblem& prep, double p_a,
                            double tolerance) {
  if (prep.clean.empty() || p_a <= prep.m0) {
    throw DegenerateCertificateError(
        "solve_threshold: p_A does not exceed the ratio-zero clean mass");
  }
  if (p_a >= 1.0) {
    throw ParameterError("solve_threshold: p_A must be < 1");
  }
  if (!(tolerance > 0.0)) {
    throw ParameterError("solve_threshold: tolerance must be positive");
  }
  double lo = 0.0;
  double hi = 0.0;
  log_threshold_bracket(prep, &lo, &hi);
  const auto cap = [&prep](double u) { return prep.capacity_at(u); };
  const auto spec = BisectionSpec::from_tolerance(lo, hi, tolerance);
  const BisectionResult res =
      bisect_monotone(cap, p_a, spec, BracketSide::kLowerBracket);
  return res.value;
}

}  // namespace

UnitProbability capacity_F(double t, const HybridProblem& problem) {
  if (!(t > 0.0) || std::isnan(t)) {
    throw ParameterError("capacity_F: t must be positive");
  }
  const PreparedProblem prep = prepare(problem);
  return clamp_unit(prep.capacity_at(std::log(t)));
}

double solve_threshold(const HybridProblem& problem, double tolerance) {
  const PreparedProblem prep = prepare(problem);
  const double p_a = problem.p_a_lower.value();
  const double u = solve_threshold_impl(prep, p_a, tolerance);
  // exp/log round-tripping can push the evaluated capacity a few ulps above
  // p_A; walk down until the one-sided contract holds on the returned t.
  double t = std::exp(u);
  for (int i = 0; i < 100 && prep.capacity_at(std::log(t)) > p_a; ++i) {
    t = std::nextafter(t, 0.0);
  }
  if (prep.capacity_at(std::log(t)) > p_a) {
    throw NumericError("solve_threshold: could not restore one-sidedness");
  }
  return t;
}

UnitProbability adversarial_value(const HybridProblem& problem,
                                  double t_threshold) {
  if (!(t_threshold > 0.0) || std::isnan(t_threshold)) {
    throw ParameterError("adversarial_value: threshold must be positive");
  }
  const PreparedProblem prep = prepare(problem);
  return clamp_unit(prep.value_at(std::log(t_threshold)));
}

UnitProbability knapsack_value(const GroupedLikelihoodRatio& groups,
                               UnitProbability p_a) {
  groups.validate();
  double remaining = p_a.value();
  KahanSum acc;
  for (const auto& g : groups.groups) {
    if (remaining <= 0.0) break;
    const double take = std::min(g.clean_mass, remaining);
    acc.add(take * g.ratio());
    remaining -= take;
  }
  return clamp_unit(acc.sum);
}

UnitProbability worst_case_value(UnitProbability p_a_lower, double sigma,
                                 const GroupedLikelihoodRatio& groups,
                                 double radius_r,
                                 double threshold_tolerance) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw ParameterError("worst_case_value: sigma must be positive");
  }
  if (radius_r < 0.0 || !std::isfinite(radius_r)) {
    throw ParameterError("worst_case_value: radius must be >= 0");
  }
  groups.validate();
  const double p_a = p_a_lower.value();
  if (p_a == 1.0) {
    // Unreachable from Clopper-Pearson bounds, and Theorem-level quantities
    // are undefined there; reject rather than extrapolate.
    throw ParameterError("worst_case_value: p_A = 1 is not certifiable");
  }
  if (p_a == 0.0) {
    return UnitProbability(0.0);
  }
  if (radius_r == 0.0) {
    return knapsack_value(groups, p_a_lower);
  }
  if (groups.is_trivial()) {
    // Pure Gaussian channel.
    return std_normal_cdf(std_normal_quantile(p_a_lower) - radius_r / sigma);
  }
  if (p_a <= groups.ratio_zero_mass()) {
    // The optimal test fills the whole constraint inside the ratio-zero set.
    return UnitProbability(0.0);
  }
  HybridProblem problem{p_a_lower, sigma, groups, radius_r};
  const PreparedProblem prep = prepare(problem);
  const double u = solve_threshold_impl(prep, p_a, threshold_tolerance);
  return clamp_unit(prep.value_at(u));
}

CertificateResult certified_radius(UnitProbability p_a_lower, double sigma,
                                   const GroupedLikelihoodRatio& groups,
                                   UnitProbability tau,
                                   double radius_tolerance,
                                   double threshold_tolerance, double r_max,
                                   int budget_d) {
  if (!(tau.value() > 0.0 && tau.value() < 1.0)) {
    throw ParameterError("certified_radius: tau must be in (0, 1)");
  }
  if (!(radius_tolerance > 0.0) || !(threshold_tolerance > 0.0)) {
    throw ParameterError("certified_radius: tolerances must be positive");
  }
  if (r_max == 0.0) {
    r_max = default_r_max(sigma);
  }
  if (!(r_max > 0.0) || !std::isfinite(r_max)) {
    throw ParameterError("certified_radius: r_max must be positive");
  }

  CertificateResult out;
  out.budget_d = budget_d;
  out.threshold_tau = tau;
  out.radius_tolerance = radius_tolerance;
  out.threshold_tolerance = threshold_tolerance;

  const auto value_at = [&](double r) {
    return worst_case_value(p_a_lower, sigma, groups, r, threshold_tolerance)
        .value();
  };

  const double v0 = value_at(0.0);
  if (!(v0 > tau.value())) {
    out.certified = false;
    out.certified_radius = 0.0;
    out.worst_case_value_at_radius = UnitProbability(v0);
    return out;
  }
  out.certified = true;

  const double v_max = value_at(r_max);
  if (v_max > tau.value()) {
    out.certified_radius = r_max;
    out.worst_case_value_at_radius = UnitProbability(v_max);
    out.bracket_limited = true;
    return out;
  }

  // Conservative outer bisection: keep the last radius whose (already
  // conservative) value cleared tau, return that lower endpoint.
  double lo = 0.0;
  double v_lo = v0;
  double hi = r_max;
  const int max_iters =
      static_cast<int>(
          std::ceil(std::log2(std::max(2.0, r_max / radius_tolerance)))) +
      2;
  for (int i = 0; i < max_iters && (hi - lo) > radius_tolerance; ++i) {
    const double mid = lo + 0.5 * (hi - lo);
    const double v = value_at(mid);
    if (v > tau.value()) {
      lo = mid;
      v_lo = v;
    } else {
      hi = mid;
    }
  }
  out.certified_radius = lo;
  out.worst_case_value_at_radius = UnitProbability(v_lo);
  return out;
}

std::vector<FrontierEntry> frontier(UnitProbability p_a_lower, double sigma,
                                    const KernelParams& kernel,
                                    ThreatFamily family,
                                    const std::vector<int>& d_values,
                                    UnitProbability tau,
                                    double radius_tolerance,
                                    double threshold_tolerance, double r_max) {
  if (d_values.empty()) {
    throw ParameterError("frontier: d_values must be nonempty");
  }
  std::vector<FrontierEntry> entries;
  entries.reserve(d_values.size());
  for (int d : d_values) {
    ThreatModel threat{family, d, kernel};
    const GroupedLikelihoodRatio groups = build_groups(threat);
    entries.push_back(
        {d, certified_radius(p_a_lower, sigma, groups, tau, radius_tolerance,
                             threshold_tolerance, r_max, d)});
  }
  // Nested adversary sets make the true radii nonincreasing in d; when two
  // budgets land within the bisection tolerance of each other, clamp the
  // larger budget down to the smaller one's radius. The clamped value is
  // still a valid lower bound for its own budget and still within tolerance.
  std::vector<std::size_t> order(entries.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&entries](std::size_t a,
                                                   std::size_t b) {
    return entries[a].budget_d < entries[b].budget_d;
  });
  double cap = std::numeric_limits<double>::infinity();
  bool dead = false;
  for (std::size_t idx : order) {
    auto& result = entries[idx].result;
    if (dead && result.certified) {
      // A smaller budget already failed; claiming less is always sound.
      result.certified = false;
      result.certified_radius = 0.0;
      result.bracket_limited = false;
    }
    if (!result.certified) {
      dead = true;
      continue;
    }
    if (result.certified_radius > cap) {
      result.certified_radius = cap;
    }
    cap = std::min(cap, result.certified_radius);
  }
  return entries;
}

}  // namespace hybridcert
