// Serial reference versus OpenMP kernels on the sizes the flows use.

#include <cmath>
#include <vector>

#include <benchmark/benchmark.h>

#include "eviflow/functionals.hpp"
#include "eviflow/kernels.hpp"
#include "eviflow/space.hpp"

namespace {

using eviflow::MetricMeasureSpace;
namespace serial = eviflow::kernels::serial;
namespace omp = eviflow::kernels::omp;

std::vector<double> quadratic(const MetricMeasureSpace& space) {
  std::vector<double> v(space.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.5 * space.coord(i) * space.coord(i);
  return v;
}

template <bool Parallel>
void BM_ProximalArgmin(benchmark::State& state) {
  const auto space = MetricMeasureSpace::interval(-2.0, 2.0, static_cast<std::size_t>(state.range(0)));
  const auto v = quadratic(space);
  const auto x = space.nearest_point(1.0);
  for (auto _ : state) {
    const auto r = Parallel ? omp::proximal_argmin(space, v, x, 0.01) : serial::proximal_argmin(space, v, x, 0.01);
    benchmark::DoNotOptimize(r);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_IntermediateArgmin(benchmark::State& state) {
  const auto space = MetricMeasureSpace::circle(static_cast<std::size_t>(state.range(0)), 1.0);
  for (auto _ : state) {
    const auto r = Parallel ? omp::intermediate_argmin(space, 3, space.size() / 3, 0.3)
                            : serial::intermediate_argmin(space, 3, space.size() / 3, 0.3);
    benchmark::DoNotOptimize(r);
  }
}

template <bool Parallel>
void BM_Variance(benchmark::State& state) {
  const auto space = MetricMeasureSpace::interval(-1.0, 1.0, static_cast<std::size_t>(state.range(0)));
  std::vector<eviflow::PointIndex> points(space.size());
  std::vector<double> weights(space.size(), 1.0 / static_cast<double>(space.size()));
  for (std::size_t i = 0; i < points.size(); ++i) points[i] = i;
  for (auto _ : state) {
    const double r = Parallel ? omp::variance2(space, points, weights) : serial::variance2(space, points, weights);
    benchmark::DoNotOptimize(r);
  }
}

template <bool Parallel>
void BM_RowLogSumExp(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<double> cost(n * n), potential(n, 0.0), out(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) cost[i * n + j] = std::pow(double(i) - double(j), 2) / double(n * n);
  for (auto _ : state) {
    if (Parallel) omp::row_log_sum_exp(cost, n, n, potential, 1e-3, out);
    else serial::row_log_sum_exp(cost, n, n, potential, 1e-3, out);
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Parallel>
void BM_ShortestPaths(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<double> base(n * n, eviflow::kInfinity);
  for (std::size_t i = 0; i < n; ++i) {
    base[i * n + i] = 0.0;
    base[i * n + (i + 1) % n] = base[((i + 1) % n) * n + i] = 1.0 + double(i % 7);
  }
  for (auto _ : state) {
    auto m = base;
    if (Parallel) omp::shortest_paths(m, n);
    else serial::shortest_paths(m, n);
    benchmark::DoNotOptimize(m.data());
  }
}

}  // namespace

BENCHMARK(BM_ProximalArgmin<false>)->Arg(4001)->Arg(40001);
BENCHMARK(BM_ProximalArgmin<true>)->Arg(4001)->Arg(40001);
BENCHMARK(BM_IntermediateArgmin<false>)->Arg(720)->Arg(20000);
BENCHMARK(BM_IntermediateArgmin<true>)->Arg(720)->Arg(20000);
BENCHMARK(BM_Variance<false>)->Arg(201)->Arg(2001);
BENCHMARK(BM_Variance<true>)->Arg(201)->Arg(2001);
BENCHMARK(BM_RowLogSumExp<false>)->Arg(201)->Arg(1001);
BENCHMARK(BM_RowLogSumExp<true>)->Arg(201)->Arg(1001);
BENCHMARK(BM_ShortestPaths<false>)->Arg(100)->Arg(300);
BENCHMARK(BM_ShortestPaths<true>)->Arg(100)->Arg(300);

BENCHMARK_MAIN();
