#pragma once

// Data-parallel inner loops. Every kernel exists twice with identical
// signatures: kernels::serial is the reference, kernels::omp splits the outer
// loop across OpenMP threads. Reductions combine per-row partials in a fixed
// order, so both versions return bit-identical results for any thread count.

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "eviflow/space.hpp"

namespace eviflow::kernels {

struct Argmin {
  double value = std::numeric_limits<double>::infinity();
  PointIndex index = 0;

  bool operator<(const Argmin& other) const noexcept {
    return value < other.value || (value == other.value && index < other.index);
  }
};

struct TriangleScan {
  double worst = 0.0;  // max of d(i,k) - d(i,j) - d(j,k), clamped below at 0
  std::array<PointIndex, 3> witness{};
  std::size_t checked = 0;
};

namespace serial {

// argmin over points y with finite potential of d^2(x,y)/(2 tau) + V(y).
Argmin proximal_argmin(const MetricMeasureSpace& space, std::span<const double> potential,
                       PointIndex x, double tau);

// argmin over all points z of the intermediate defect for (x, y, t).
Argmin intermediate_argmin(const MetricMeasureSpace& space, PointIndex x, PointIndex y,
                           double t);

// sum_{a,b} w_a w_b d^2(p_a, p_b) over an atom list.
double variance2(const MetricMeasureSpace& space, std::span<const PointIndex> points,
                 std::span<const double> weights);

// out[r] = log sum_c exp((potential[c] - cost[r, c]) / gamma); cost is rows x cols.
void row_log_sum_exp(std::span<const double> cost, std::size_t rows, std::size_t cols,
                     std::span<const double> potential, double gamma, std::span<double> out);

// Floyd-Warshall in place on a dense row-major n x n matrix.
void shortest_paths(std::span<double> matrix, std::size_t n);

// Exhaustive triangle-inequality scan over all ordered triples.
TriangleScan triangle_scan(const MetricMeasureSpace& space);

}  // namespace serial

namespace omp {

// Same contracts as serial::.
Argmin proximal_argmin(const MetricMeasureSpace& space, std::span<const double> potential,
                       PointIndex x, double tau);

Argmin intermediate_argmin(const MetricMeasureSpace& space, PointIndex x, PointIndex y,
                           double t);

double variance2(const MetricMeasureSpace& space, std::span<const PointIndex> points,
                 std::span<const double> weights);

void row_log_sum_exp(std::span<const double> cost, std::size_t rows, std::size_t cols,
                     std::span<const double> potential, double gamma, std::span<double> out);

void shortest_paths(std::span<double> matrix, std::size_t n);

TriangleScan triangle_scan(const MetricMeasureSpace& space);

}  // namespace omp

/// Number of OpenMP threads the omp kernels will use (1 without OpenMP).
int thread_count();

}  // namespace eviflow::kernels
