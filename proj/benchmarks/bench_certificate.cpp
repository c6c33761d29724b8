#include <benchmark/benchmark.h>

#include "hybridcert/certificate.hpp"
#include "hybridcert/confidence.hpp"
#include "hybridcert/kernels.hpp"
#include "hybridcert/oracle.hpp"

using namespace hybridcert;

namespace {

void BM_std_normal_cdf(benchmark::State& state) {
  double x = -8.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(std_normal_cdf(x).value());
    x += 1e-6;
    if (x > 8.0) x = -8.0;
  }
}
BENCHMARK(BM_std_normal_cdf);

void BM_std_normal_quantile(benchmark::State& state) {
  double p = 1e-6;
  for (auto _ : state) {
    benchmark::DoNotOptimize(std_normal_quantile(UnitProbability(p)));
    p += 1e-7;
    if (p > 0.999999) p = 1e-6;
  }
}
BENCHMARK(BM_std_normal_quantile);

void BM_build_uniform_groups(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        build_uniform_groups(d, UnitProbability(0.25), 50000));
  }
}
BENCHMARK(BM_build_uniform_groups)->Arg(1)->Arg(4)->Arg(8)->Arg(16);

void BM_solve_threshold(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const auto groups = build_uniform_groups(d, UnitProbability(0.25), 50000);
  HybridProblem problem{UnitProbability(0.95), 1.0, groups, 1.0};
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_threshold(problem, 1e-9));
  }
}
BENCHMARK(BM_solve_threshold)->Arg(1)->Arg(4)->Arg(8);

void BM_worst_case_value(benchmark::State& state) {
  const auto groups =
      build_uniform_groups(static_cast<int>(state.range(0)),
                           UnitProbability(0.25), 50000);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        worst_case_value(UnitProbability(0.95), 1.0, groups, 1.0).value());
  }
}
BENCHMARK(BM_worst_case_value)->Arg(1)->Arg(8);

void BM_certified_radius(benchmark::State& state) {
  // beta = 0.5 keeps all three budgets certifiable, so every run pays for
  // the full outer bisection rather than the degenerate early exit.
  const auto groups =
      build_uniform_groups(static_cast<int>(state.range(0)),
                           UnitProbability(0.5), 50000);
  for (auto _ : state) {
    benchmark::DoNotOptimize(certified_radius(UnitProbability(0.999), 1.0,
                                              groups,
                                              UnitProbability(1e-6)));
  }
}
BENCHMARK(BM_certified_radius)->Arg(1)->Arg(4)->Arg(8);

void BM_clopper_pearson(benchmark::State& state) {
  const std::int64_t n = state.range(0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        clopper_pearson_lower({n, (9 * n) / 10, UnitProbability(0.01)})
            .value());
  }
}
BENCHMARK(BM_clopper_pearson)->Arg(1000)->Arg(10000)->Arg(100000);

void BM_quadrature_oracle(benchmark::State& state) {
  const auto groups = build_uniform_groups(2, UnitProbability(0.25), 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        oracle::quadrature_np_value(groups, 1.0, 2.0, UnitProbability(0.95))
            .value());
  }
}
BENCHMARK(BM_quadrature_oracle);

}  // namespace

BENCHMARK_MAIN();
