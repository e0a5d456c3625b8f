#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "eviflow/space.hpp"
#include "eviflow/transport.hpp"

namespace eviflow {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Witness constants for V >= -c0 - c1 d^2(., anchor).
struct LowerBound {
  double c0;
  double c1;
  PointIndex anchor;
};

/// Per-point potential values in (-inf, +inf]. +inf marks points outside
/// the effective domain X0 = {V < inf}.
class Potential {
 public:
  /// Throws std::invalid_argument on NaN or -inf values or an empty X0.
  explicit Potential(std::vector<double> values);

  /// Also checks the quadratic lower bound at every point.
  Potential(const MetricMeasureSpace& space, std::vector<double> values, LowerBound bound);

  /// Evaluates f at every point coordinate.
  static Potential from_formula(const MetricMeasureSpace& space,
                                const std::function<double(double)>& f);

  std::size_t size() const noexcept { return values_.size(); }
  double operator()(PointIndex i) const noexcept { return values_[i]; }
  std::span<const double> values() const noexcept { return values_; }
  bool finite(PointIndex i) const noexcept { return values_[i] < kInfinity; }
  std::span<const PointIndex> finite_set() const noexcept { return finite_set_; }
  const std::optional<LowerBound>& lower_bound() const noexcept { return bound_; }

 private:
  std::vector<double> values_;
  std::vector<PointIndex> finite_set_;
  std::optional<LowerBound> bound_;
};

/// CSV with header "point_index,value"; the token "inf" stands for +inf.
/// Every point of an n-point space must appear exactly once.
Potential read_potential_csv(std::istream& in, std::size_t n);
Potential read_potential_csv(const std::filesystem::path& path, std::size_t n);

/// Ent(mu | m) = sum mu_i log(mu_i / m_i) with 0 log 0 = 0.
double entropy(const MetricMeasureSpace& space, const ProbabilityMeasure& mu);

/// Entropy against arbitrary nonnegative reference weights; +inf when mu
/// charges a point of zero reference weight.
double relative_entropy(std::span<const double> reference, const ProbabilityMeasure& mu);

/// S(mu) = sum V_i mu_i; +inf when mu charges a point outside X0.
double potential_energy(const Potential& v, const ProbabilityMeasure& mu);

/// S_n(mu) = Ent(mu | m)/n + S(mu).
double regularized_energy(const MetricMeasureSpace& space, const Potential& v,
                          const ProbabilityMeasure& mu, double n);

/// Ent(mu | e^{-nV} m) / n, the same functional through the tilted reference.
double tilted_entropy(const MetricMeasureSpace& space, const Potential& v,
                      const ProbabilityMeasure& mu, double n);

struct ConvexityWitness {
  PointIndex x = 0;
  PointIndex y = 0;
  double t = 0.0;
  PointIndex z = 0;
};

struct ConvexityReport {
  double kappa = 0.0;
  double worst_violation = -kInfinity;
  ConvexityWitness witness;
  std::size_t samples_checked = 0;
  double quantization_slack = 0.0;
  double lipschitz_estimate = 0.0;
  double max_defect = 0.0;

  bool pass() const noexcept;
};

/// The nine interior geodesic parameters 0.1, ..., 0.9.
std::span<const double> convexity_t_grid() noexcept;

/// Largest |V(x) - V(y)| / d(x,y) over finite pairs with d <= 2 * resolution.
double local_lipschitz_estimate(const MetricMeasureSpace& space, const Potential& v);

/// Samples V(z) - [(1-t)V(x) + tV(y) - kappa t(1-t) d^2(x,y)/2] over pairs in
/// X0 x X0 and the t-grid, with z the best available intermediate point.
/// Exhaustive over pairs when |X0|^2 <= sample_budget, otherwise sample_budget
/// pairs drawn uniformly with the given seed. The slack defaults to
/// Lip(V) times the worst intermediate defect seen.
ConvexityReport kappa_convexity_report(const MetricMeasureSpace& space, const Potential& v,
                                       double kappa, std::size_t sample_budget,
                                       std::uint64_t seed = 0,
                                       std::optional<double> slack = std::nullopt);

}  // namespace eviflow
