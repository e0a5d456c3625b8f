// Entropic optimal transport in the log domain.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

#include "eviflow/errors.hpp"
#include "eviflow/kernels.hpp"
#include "eviflow/transport.hpp"

namespace eviflow {

namespace {

constexpr double kMarginalThreshold = 1e-9;
// Intermediate annealing stages only need a warm start for the next one.
constexpr double kStageThreshold = 1e-5;

std::vector<double> transpose(std::span<const double> m, std::size_t rows, std::size_t cols) {
  std::vector<double> t(m.size());
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) t[j * rows + i] = m[i * cols + j];
  return t;
}

// Rounds a near-feasible plan onto the exact marginals: scale rows and
// columns down where they overshoot, then spread the deficit as a rank-one
// correction.
void round_to_marginals(std::vector<double>& plan, std::span<const double> mu,
                        std::span<const double> nu) {
  const std::size_t rows = mu.size(), cols = nu.size();
  for (std::size_t i = 0; i < rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < cols; ++j) s += plan[i * cols + j];
    if (s > mu[i]) {
      const double f = mu[i] / s;
      for (std::size_t j = 0; j < cols; ++j) plan[i * cols + j] *= f;
    }
  }
  std::vector<double> colsum(cols, 0.0);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) colsum[j] += plan[i * cols + j];
  for (std::size_t j = 0; j < cols; ++j) {
    if (colsum[j] > nu[j]) {
      const double f = nu[j] / colsum[j];
      for (std::size_t i = 0; i < rows; ++i) plan[i * cols + j] *= f;
    }
  }
  std::vector<double> row_deficit(rows), col_deficit(cols, 0.0);
  double deficit = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < cols; ++j) s += plan[i * cols + j];
    row_deficit[i] = std::max(0.0, mu[i] - s);
    deficit += row_deficit[i];
  }
  for (std::size_t j = 0; j < cols; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < rows; ++i) s += plan[i * cols + j];
    col_deficit[j] = std::max(0.0, nu[j] - s);
  }
  if (deficit <= 0.0) return;
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      plan[i * cols + j] += row_deficit[i] * col_deficit[j] / deficit;
}

}  // namespace

TransportResult w2_entropic(const MetricMeasureSpace& space, const ProbabilityMeasure& mu,
                            const ProbabilityMeasure& nu, double epsilon, int max_iter) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("entropic smoothing must be positive");
  if (mu.size() != space.size() || nu.size() != space.size()) {
    throw std::invalid_argument("measures do not match the space");
  }

  // Empty rows and columns make the scaling updates diverge; drop them.
  const auto row_points = mu.support();
  const auto col_points = nu.support();
  const std::size_t rows = row_points.size(), cols = col_points.size();
  std::vector<double> a(rows), b(cols), log_a(rows), log_b(cols);
  for (std::size_t i = 0; i < rows; ++i) {
    a[i] = mu[row_points[i]];
    log_a[i] = std::log(a[i]);
  }
  for (std::size_t j = 0; j < cols; ++j) {
    b[j] = nu[col_points[j]];
    log_b[j] = std::log(b[j]);
  }

  std::vector<double> cost(rows * cols);
  double max_cost = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      cost[i * cols + j] = space.squared_distance(row_points[i], col_points[j]);
      max_cost = std::max(max_cost, cost[i * cols + j]);
    }
  }
  const auto cost_t = transpose(cost, rows, cols);

  std::vector<double> f(rows, 0.0), g(cols, 0.0), row_lse(rows), col_lse(cols);
  double violation = std::numeric_limits<double>::infinity();
  int iterations = 0;
  double gamma = std::max(max_cost, epsilon);
  while (true) {
    const bool final_stage = gamma <= epsilon;
    const double threshold = final_stage ? kMarginalThreshold : kStageThreshold;
    while (true) {
      kernels::omp::row_log_sum_exp(cost, rows, cols, g, gamma, row_lse);
      // Columns are exact after the previous g-update; measure the rows.
      if (iterations > 0) {
        violation = 0.0;
        for (std::size_t i = 0; i < rows; ++i)
          violation += std::abs(std::exp(f[i] / gamma + row_lse[i]) - a[i]);
        if (violation <= threshold) break;
      }
      if (iterations >= max_iter) {
        throw IterationLimitError(
            fmt::format("Sinkhorn did not reach marginal violation {} within {} iterations "
                        "(last {:.3e})",
                        kMarginalThreshold, max_iter, violation),
            violation);
      }
      ++iterations;
      for (std::size_t i = 0; i < rows; ++i) f[i] = gamma * (log_a[i] - row_lse[i]);
      kernels::omp::row_log_sum_exp(cost_t, cols, rows, f, gamma, col_lse);
      for (std::size_t j = 0; j < cols; ++j) g[j] = gamma * (log_b[j] - col_lse[j]);
    }
    if (final_stage) break;
    gamma = std::max(gamma * 0.5, epsilon);
  }

  std::vector<double> plan(rows * cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      plan[i * cols + j] = std::exp((f[i] + g[j] - cost[i * cols + j]) / gamma);
  round_to_marginals(plan, a, b);

  std::vector<CouplingEntry> entries;
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      if (plan[i * cols + j] > 0.0) entries.push_back({row_points[i], col_points[j], plan[i * cols + j]});
  Coupling coupling(std::move(entries), mu, nu);
  const double squared = coupling.cost(space);
  return TransportResult{squared, std::move(coupling), TransportMethod::Entropic, violation};
}

}  // namespace eviflow
