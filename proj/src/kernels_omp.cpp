#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "eviflow/kernels.hpp"

namespace eviflow::kernels {

int thread_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace omp {

namespace {

// Below this many inner evaluations the fork/join costs more than it saves.
constexpr std::size_t kParallelThreshold = 4096;

// (value, index) is a total order, so the combined minimum does not depend on
// which thread finishes first.
template <typename Eval>
Argmin parallel_argmin(std::size_t n, Eval&& eval) {
  Argmin best;
#pragma omp parallel if (n >= kParallelThreshold)
  {
    Argmin local;
#pragma omp for schedule(static) nowait
    for (std::ptrdiff_t y = 0; y < static_cast<std::ptrdiff_t>(n); ++y) {
      const Argmin candidate = eval(static_cast<PointIndex>(y));
      if (candidate < local) local = candidate;
    }
#pragma omp critical(eviflow_argmin)
    if (local < best) best = local;
  }
  return best;
}

}  // namespace

Argmin proximal_argmin(const MetricMeasureSpace& space, std::span<const double> potential,
                       PointIndex x, double tau) {
  const double scale = 1.0 / (2.0 * tau);
  return parallel_argmin(space.size(), [&](PointIndex y) {
    if (!std::isfinite(potential[y])) return Argmin{};
    return Argmin{space.squared_distance(x, y) * scale + potential[y], y};
  });
}

Argmin intermediate_argmin(const MetricMeasureSpace& space, PointIndex x, PointIndex y,
                           double t) {
  return parallel_argmin(space.size(), [&](PointIndex z) {
    return Argmin{intermediate_defect(space, x, y, t, z), z};
  });
}

double variance2(const MetricMeasureSpace& space, std::span<const PointIndex> points,
                 std::span<const double> weights) {
  const std::size_t m = points.size();
  std::vector<double> partial(m);
#pragma omp parallel for schedule(static) if (m * m >= kParallelThreshold)
  for (std::ptrdiff_t a = 0; a < static_cast<std::ptrdiff_t>(m); ++a) {
    double row = 0.0;
    for (std::size_t b = 0; b < m; ++b) {
      row += weights[b] * space.squared_distance(points[a], points[b]);
    }
    partial[a] = weights[a] * row;
  }
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

void row_log_sum_exp(std::span<const double> cost, std::size_t rows, std::size_t cols,
                     std::span<const double> potential, double gamma, std::span<double> out) {
#pragma omp parallel for schedule(static) if (rows * cols >= kParallelThreshold)
  for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(rows); ++r) {
    const double* c = cost.data() + r * cols;
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < cols; ++j) peak = std::max(peak, (potential[j] - c[j]) / gamma);
    if (!std::isfinite(peak)) {
      out[r] = peak;
      continue;
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < cols; ++j) sum += std::exp((potential[j] - c[j]) / gamma - peak);
    out[r] = peak + std::log(sum);
  }
}

void shortest_paths(std::span<double> matrix, std::size_t n) {
  // Row k is not modified during pass k because d(k,k) = 0.
  for (std::size_t k = 0; k < n; ++k) {
#pragma omp parallel for schedule(static) if (n * n >= kParallelThreshold)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
      const double dik = matrix[i * n + k];
      if (!std::isfinite(dik)) continue;
      for (std::size_t j = 0; j < n; ++j) {
        matrix[i * n + j] = std::min(matrix[i * n + j], dik + matrix[k * n + j]);
      }
    }
  }
}

TriangleScan triangle_scan(const MetricMeasureSpace& space) {
  const std::size_t n = space.size();
  std::vector<TriangleScan> per_row(n);
#pragma omp parallel for schedule(dynamic) if (n * n * n >= kParallelThreshold)
  for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
    const auto i = static_cast<PointIndex>(ii);
    TriangleScan& scan = per_row[i];
    for (PointIndex j = 0; j < n; ++j) {
      for (PointIndex k = 0; k < n; ++k) {
        const double excess = space.distance(i, k) - space.distance(i, j) - space.distance(j, k);
        if (excess > scan.worst) {
          scan.worst = excess;
          scan.witness = {i, j, k};
        }
      }
    }
  }
  TriangleScan scan;
  for (const auto& row : per_row) {
    if (row.worst > scan.worst) {
      scan.worst = row.worst;
      scan.witness = row.witness;
    }
  }
  scan.checked = n * n * n;
  return scan;
}

}  // namespace omp
}  // namespace eviflow::kernels
