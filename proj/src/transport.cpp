#include "eviflow/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>

#include "eviflow/kernels.hpp"

namespace eviflow {

namespace {

double total(std::span<const double> w) {
  double s = 0.0;
  for (double x : w) s += x;
  return s;
}

}  // namespace

ProbabilityMeasure::ProbabilityMeasure(std::vector<double> weights) : weights_(std::move(weights)) {
  if (weights_.empty()) throw std::invalid_argument("probability measure on an empty space");
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    if (!(weights_[i] >= 0.0) || !std::isfinite(weights_[i])) {
      throw std::invalid_argument(fmt::format("weight {} at point {} is negative", weights_[i], i));
    }
  }
  const double mass = total(weights_);
  if (std::abs(mass - 1.0) > kMassTolerance) {
    throw std::invalid_argument(fmt::format("weights sum to {:.17g}, not 1", mass));
  }
}

ProbabilityMeasure ProbabilityMeasure::dirac(std::size_t n, PointIndex x) {
  if (x >= n) throw std::invalid_argument(fmt::format("Dirac point {} outside 0..{}", x, n - 1));
  std::vector<double> w(n, 0.0);
  w[x] = 1.0;
  return ProbabilityMeasure(std::move(w));
}

ProbabilityMeasure ProbabilityMeasure::uniform(std::size_t n) {
  return normalized(std::vector<double>(n, 1.0));
}

ProbabilityMeasure ProbabilityMeasure::normalized(std::vector<double> weights) {
  const double mass = total(weights);
  if (!(mass > 0.0) || !std::isfinite(mass)) {
    throw std::invalid_argument("weights have no positive finite total");
  }
  for (double& w : weights) w /= mass;
  return ProbabilityMeasure(std::move(weights));
}

std::vector<PointIndex> ProbabilityMeasure::support() const {
  std::vector<PointIndex> s;
  for (PointIndex i = 0; i < weights_.size(); ++i)
    if (weights_[i] > 0.0) s.push_back(i);
  return s;
}

Coupling::Coupling(std::vector<CouplingEntry> entries, ProbabilityMeasure first,
                   ProbabilityMeasure second)
    : entries_(std::move(entries)), first_(std::move(first)), second_(std::move(second)) {
  std::sort(entries_.begin(), entries_.end(), [](const CouplingEntry& a, const CouplingEntry& b) {
    return a.source != b.source ? a.source < b.source : a.target < b.target;
  });
  std::vector<double> rows(first_.size(), 0.0), cols(second_.size(), 0.0);
  for (const auto& e : entries_) {
    if (e.source >= rows.size() || e.target >= cols.size()) {
      throw std::invalid_argument("coupling entry outside the marginal spaces");
    }
    if (!(e.mass >= 0.0)) throw std::invalid_argument("coupling entry has negative mass");
    rows[e.source] += e.mass;
    cols[e.target] += e.mass;
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (std::abs(rows[i] - first_[i]) > kMarginalTolerance) {
      throw std::invalid_argument(fmt::format("row {} sums to {:.17g}, expected {:.17g}", i,
                                              rows[i], first_[i]));
    }
  }
  for (std::size_t j = 0; j < cols.size(); ++j) {
    if (std::abs(cols[j] - second_[j]) > kMarginalTolerance) {
      throw std::invalid_argument(fmt::format("column {} sums to {:.17g}, expected {:.17g}", j,
                                              cols[j], second_[j]));
    }
  }
}

double Coupling::cost(const MetricMeasureSpace& space) const {
  double c = 0.0;
  for (const auto& e : entries_) c += e.mass * space.squared_distance(e.source, e.target);
  return c;
}

namespace {

void require_same_space(const MetricMeasureSpace& space, const ProbabilityMeasure& mu,
                        const ProbabilityMeasure& nu) {
  if (mu.size() != space.size() || nu.size() != space.size()) {
    throw std::invalid_argument(fmt::format("measures of size {} and {} on a space of {} points",
                                            mu.size(), nu.size(), space.size()));
  }
}

std::vector<double> gather(const ProbabilityMeasure& mu, std::span<const PointIndex> support) {
  std::vector<double> w;
  w.reserve(support.size());
  for (PointIndex p : support) w.push_back(mu[p]);
  return w;
}

std::vector<double> squared_cost_matrix(const MetricMeasureSpace& space,
                                        std::span<const PointIndex> rows,
                                        std::span<const PointIndex> cols) {
  std::vector<double> c(rows.size() * cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j)
      c[i * cols.size() + j] = space.squared_distance(rows[i], cols[j]);
  return c;
}

TransportResult identity_transport(const MetricMeasureSpace&, const ProbabilityMeasure& mu,
                                   TransportMethod method) {
  std::vector<CouplingEntry> entries;
  for (PointIndex p : mu.support()) entries.push_back({p, p, mu[p]});
  return TransportResult{0.0, Coupling(std::move(entries), mu, mu), method, 0.0};
}

}  // namespace

TransportResult w2_exact(const MetricMeasureSpace& space, const ProbabilityMeasure& mu,
                         const ProbabilityMeasure& nu) {
  require_same_space(space, mu, nu);
  if (mu == nu) return identity_transport(space, mu, TransportMethod::Exact);

  const auto rows = mu.support();
  const auto cols = nu.support();
  const auto supply = gather(mu, rows);
  const auto demand = gather(nu, cols);
  const auto cost = squared_cost_matrix(space, rows, cols);
  const auto solution = detail::solve_transportation(cost, supply, demand);

  std::vector<CouplingEntry> entries;
  double primal = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      const double q = solution.flow[i * cols.size() + j];
      if (q > 0.0) {
        entries.push_back({rows[i], cols[j], q});
        primal += q * cost[i * cols.size() + j];
      }
    }
  }

  // Certificate: c-transform the column potentials to get a feasible dual.
  double dual = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) dual += solution.row_potential[i] * supply[i];
  for (std::size_t j = 0; j < cols.size(); ++j) {
    double v = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < rows.size(); ++i)
      v = std::min(v, cost[i * cols.size() + j] - solution.row_potential[i]);
    dual += v * demand[j];
  }

  Coupling coupling(std::move(entries), mu, nu);
  const double squared = coupling.cost(space);
  return TransportResult{squared, std::move(coupling), TransportMethod::Exact, primal - dual};
}

double wasserstein2(const MetricMeasureSpace& space, const ProbabilityMeasure& mu,
                    const ProbabilityMeasure& nu) {
  if (mu == nu) return 0.0;
  return std::sqrt(std::max(0.0, w2_exact(space, mu, nu).squared_cost));
}

double variance2(const MetricMeasureSpace& space, const ProbabilityMeasure& mu) {
  if (mu.size() != space.size()) throw std::invalid_argument("measure does not match the space");
  const auto points = mu.support();
  const auto weights = gather(mu, points);
  return kernels::omp::variance2(space, points, weights);
}

void write_coupling_csv(std::ostream& out, const Coupling& coupling) {
  out << "i,j,mass\n";
  for (const auto& e : coupling.entries()) {
    out << fmt::format("{},{},{:.17g}\n", e.source, e.target, e.mass);
  }
}

}  // namespace eviflow
