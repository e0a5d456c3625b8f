// Minimizing-movement step for S_n(nu) = Ent(nu|m)/n + sum V nu.
//
// The step is solved over plans q with first marginal mu:
//
//   min_q  <q, c> + gamma <q, log q - 1> + S_n(q^T 1),   c = d^2 / (2 tau)
//
// With q = diag(e^{f/gamma}) K diag(e^{g/gamma}), K = e^{-c/gamma}, the row
// constraint is a Sinkhorn update and the column term is a KL proximal step
// with a closed form: for p = K^T e^{f/gamma} and alpha = 1/(n gamma),
//
//   log nu = (log p + alpha log m - V/gamma - alpha) / (1 + alpha).

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

#include "eviflow/errors.hpp"
#include "eviflow/flow.hpp"
#include "eviflow/kernels.hpp"

namespace eviflow {

JkoSolve regularized_jko_step(const MetricMeasureSpace& space, const Potential& v, double n,
                              const ProbabilityMeasure& mu, double tau, double solver_tolerance,
                              int max_iter) {
  if (!(n > 0.0)) throw std::invalid_argument("regularization index n must be positive");
  if (!(tau > 0.0)) throw std::invalid_argument("step size must be positive");
  if (!(solver_tolerance > 0.0)) throw std::invalid_argument("solver tolerance must be positive");
  if (mu.size() != space.size() || v.size() != space.size()) {
    throw std::invalid_argument("measure or potential does not match the space");
  }

  const auto rows = mu.support();
  const auto cols = v.finite_set();
  const std::size_t nr = rows.size(), nc = cols.size();

  const double diameter = space.diameter();
  const double target_gamma = solver_tolerance * std::max(diameter * diameter, 1e-300);

  std::vector<double> cost(nr * nc), cost_t(nr * nc);
  double max_cost = 0.0;
  for (std::size_t i = 0; i < nr; ++i) {
    for (std::size_t j = 0; j < nc; ++j) {
      const double c = space.squared_distance(rows[i], cols[j]) / (2.0 * tau);
      cost[i * nc + j] = c;
      cost_t[j * nr + i] = c;
      max_cost = std::max(max_cost, c);
    }
  }
  std::vector<double> log_mu(nr), log_m(nc), potential(nc);
  for (std::size_t i = 0; i < nr; ++i) log_mu[i] = std::log(mu[rows[i]]);
  for (std::size_t j = 0; j < nc; ++j) {
    log_m[j] = std::log(space.measure(cols[j]));
    potential[j] = v(cols[j]);
  }

  std::vector<double> f(nr, 0.0), g(nc, 0.0), row_lse(nr), col_lse(nc), column(nc);

  // Objective of the plan defined by (f, g) after a row update.
  const auto evaluate = [&](double gamma) {
    std::fill(column.begin(), column.end(), 0.0);
    double transport = 0.0;
    for (std::size_t i = 0; i < nr; ++i) {
      for (std::size_t j = 0; j < nc; ++j) {
        const double q = std::exp((f[i] + g[j] - cost[i * nc + j]) / gamma);
        column[j] += q;
        transport += q * cost[i * nc + j];
      }
    }
    double energy = 0.0;
    for (std::size_t j = 0; j < nc; ++j) {
      if (column[j] > 0.0) {
        energy += column[j] * (potential[j] + (std::log(column[j]) - log_m[j]) / n);
      }
    }
    return transport + energy;
  };
  const auto update_rows = [&](double gamma) {
    kernels::omp::row_log_sum_exp(cost, nr, nc, g, gamma, row_lse);
    for (std::size_t i = 0; i < nr; ++i) f[i] = gamma * (log_mu[i] - row_lse[i]);
  };

  // Smoothing starts at the cost scale and shrinks by 4 per stage; each stage
  // runs until the column marginal of the plan is within solver_tolerance
  // (in total variation) of its proximal target and the objective has
  // settled. At small smoothing the objective alone stalls long before the
  // plan converges.
  double gamma = std::max(target_gamma, max_cost);
  double objective = std::numeric_limits<double>::infinity();
  int iterations = 0;
  while (true) {
    const double alpha = 1.0 / (n * gamma);
    while (true) {
      update_rows(gamma);
      kernels::omp::row_log_sum_exp(cost_t, nc, nr, f, gamma, col_lse);
      double mismatch = 0.0;
      for (std::size_t j = 0; j < nc; ++j) {
        const double log_nu =
            (col_lse[j] + alpha * log_m[j] - potential[j] / gamma - alpha) / (1.0 + alpha);
        mismatch += std::abs(std::exp(g[j] / gamma + col_lse[j]) - std::exp(log_nu));
        g[j] = gamma * (log_nu - col_lse[j]);
      }
      ++iterations;
      if (mismatch <= solver_tolerance) {
        update_rows(gamma);
        const double previous = objective;
        objective = evaluate(gamma);
        if (gamma > target_gamma || std::abs(objective - previous) <= solver_tolerance) break;
      }
      if (iterations >= max_iter) {
        update_rows(gamma);
        objective = evaluate(gamma);
        throw IterationLimitError(
            fmt::format("regularized JKO step did not settle within {} iterations (objective {:.6g})",
                        max_iter, objective),
            objective);
      }
    }
    if (gamma <= target_gamma) break;
    gamma = std::max(target_gamma, gamma / 4.0);
    objective = std::numeric_limits<double>::infinity();
  }

  std::vector<double> weights(space.size(), 0.0);
  for (std::size_t j = 0; j < nc; ++j) weights[cols[j]] = column[j];
  return JkoSolve{ProbabilityMeasure::normalized(std::move(weights)), objective, gamma, iterations};
}

}  // namespace eviflow
