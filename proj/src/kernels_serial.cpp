#include <algorithm>
#include <cmath>
#include <limits>

#include "eviflow/kernels.hpp"

namespace eviflow::kernels::serial {

Argmin proximal_argmin(const MetricMeasureSpace& space, std::span<const double> potential,
                       PointIndex x, double tau) {
  Argmin best;
  const double scale = 1.0 / (2.0 * tau);
  for (PointIndex y = 0; y < space.size(); ++y) {
    if (!std::isfinite(potential[y])) continue;
    const Argmin candidate{space.squared_distance(x, y) * scale + potential[y], y};
    if (candidate < best) best = candidate;
  }
  return best;
}

Argmin intermediate_argmin(const MetricMeasureSpace& space, PointIndex x, PointIndex y,
                           double t) {
  Argmin best;
  for (PointIndex z = 0; z < space.size(); ++z) {
    const Argmin candidate{intermediate_defect(space, x, y, t, z), z};
    if (candidate < best) best = candidate;
  }
  return best;
}

double variance2(const MetricMeasureSpace& space, std::span<const PointIndex> points,
                 std::span<const double> weights) {
  double total = 0.0;
  for (std::size_t a = 0; a < points.size(); ++a) {
    double row = 0.0;
    for (std::size_t b = 0; b < points.size(); ++b) {
      row += weights[b] * space.squared_distance(points[a], points[b]);
    }
    total += weights[a] * row;
  }
  return total;
}

void row_log_sum_exp(std::span<const double> cost, std::size_t rows, std::size_t cols,
                     std::span<const double> potential, double gamma, std::span<double> out) {
  for (std::size_t r = 0; r < rows; ++r) {
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
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      const double dik = matrix[i * n + k];
      if (!std::isfinite(dik)) continue;
      for (std::size_t j = 0; j < n; ++j) {
        matrix[i * n + j] = std::min(matrix[i * n + j], dik + matrix[k * n + j]);
      }
    }
  }
}

TriangleScan triangle_scan(const MetricMeasureSpace& space) {
  TriangleScan scan;
  const std::size_t n = space.size();
  for (PointIndex i = 0; i < n; ++i) {
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
  scan.checked = n * n * n;
  return scan;
}

}  // namespace eviflow::kernels::serial
