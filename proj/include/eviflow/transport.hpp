#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "eviflow/space.hpp"

namespace eviflow {

/// Probability weights on the points of a space.
class ProbabilityMeasure {
 public:
  static constexpr double kMassTolerance = 1e-12;

  /// Throws std::invalid_argument unless the weights are nonnegative and sum
  /// to 1 within kMassTolerance.
  explicit ProbabilityMeasure(std::vector<double> weights);

  static ProbabilityMeasure dirac(std::size_t n, PointIndex x);
  static ProbabilityMeasure uniform(std::size_t n);
  /// Rescales nonnegative weights with positive total to unit mass.
  static ProbabilityMeasure normalized(std::vector<double> weights);

  std::size_t size() const noexcept { return weights_.size(); }
  double operator[](PointIndex i) const noexcept { return weights_[i]; }
  std::span<const double> weights() const noexcept { return weights_; }

  /// Points with positive mass, ascending.
  std::vector<PointIndex> support() const;

  friend bool operator==(const ProbabilityMeasure&, const ProbabilityMeasure&) = default;

 private:
  std::vector<double> weights_;
};

struct CouplingEntry {
  PointIndex source;
  PointIndex target;
  double mass;

  friend bool operator==(const CouplingEntry&, const CouplingEntry&) = default;
};

/// Sparse joint weights with prescribed marginals; entries are row-major.
class Coupling {
 public:
  static constexpr double kMarginalTolerance = 1e-9;

  /// Throws std::invalid_argument if an entry is negative or a marginal is
  /// off by more than kMarginalTolerance.
  Coupling(std::vector<CouplingEntry> entries, ProbabilityMeasure first, ProbabilityMeasure second);

  std::span<const CouplingEntry> entries() const noexcept { return entries_; }
  const ProbabilityMeasure& first_marginal() const noexcept { return first_; }
  const ProbabilityMeasure& second_marginal() const noexcept { return second_; }

  double cost(const MetricMeasureSpace& space) const;

 private:
  std::vector<CouplingEntry> entries_;
  ProbabilityMeasure first_;
  ProbabilityMeasure second_;
};

enum class TransportMethod { Exact, Entropic };

struct TransportResult {
  double squared_cost;  // W2^2 evaluated on the returned coupling
  Coupling coupling;
  TransportMethod method;
  // Exact: primal minus c-transformed dual objective. Entropic: final L1
  // marginal violation before rounding onto the feasible set.
  double dual_gap_or_tolerance;
};

/// Exact W2^2 by the transportation simplex on the supports of mu and nu.
TransportResult w2_exact(const MetricMeasureSpace& space, const ProbabilityMeasure& mu,
                         const ProbabilityMeasure& nu);

/// Log-domain Sinkhorn with kernel exp(-d^2/epsilon), annealed from the
/// squared diameter down to epsilon. Stops once the L1 marginal violation is
/// at most 1e-9, then rounds the plan onto the exact marginals. Throws
/// IterationLimitError after max_iter half-step pairs.
TransportResult w2_entropic(const MetricMeasureSpace& space, const ProbabilityMeasure& mu,
                            const ProbabilityMeasure& nu, double epsilon, int max_iter = 200000);

/// sqrt of w2_exact's cost; exactly 0 for identical measures.
double wasserstein2(const MetricMeasureSpace& space, const ProbabilityMeasure& mu,
                    const ProbabilityMeasure& nu);

/// Var2(mu) = sum_{x,y} d^2(x,y) mu(x) mu(y).
double variance2(const MetricMeasureSpace& space, const ProbabilityMeasure& mu);

/// "i,j,mass" header, one row per entry, 17 significant digits.
void write_coupling_csv(std::ostream& out, const Coupling& coupling);

namespace detail {

struct TransportSolution {
  std::vector<double> flow;  // rows x cols, row-major
  std::vector<double> row_potential;
  std::vector<double> col_potential;
  std::size_t pivots = 0;
};

/// Transportation simplex on a dense cost matrix. Supplies and demands must
/// be positive with equal totals.
TransportSolution solve_transportation(std::span<const double> cost, std::span<const double> supply,
                                       std::span<const double> demand);

}  // namespace detail

}  // namespace eviflow
