#include "eviflow/verify.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include <fmt/format.h>

#include "eviflow/errors.hpp"

namespace eviflow {

namespace {

void require_same_grid(std::span<const double> a, std::span<const double> b, double tau_a,
                       double tau_b) {
  if (a.size() != b.size() || tau_a != tau_b || !std::equal(a.begin(), a.end(), b.begin())) {
    throw std::invalid_argument("trajectories are not on the same time grid");
  }
}

void update(EviReport& report, double residual, double s, double t, std::string observation) {
  ++report.evaluations;
  if (residual > report.max_residual) {
    report.max_residual = residual;
    report.witness_time = s;
    report.witness_end_time = t;
    report.witness_observation = std::move(observation);
  }
}

}  // namespace

EviReport evi_differential_residual(const MetricMeasureSpace& space, const FlowTrajectory& traj,
                                    const Potential& v, double kappa,
                                    std::span<const PointIndex> observation_points) {
  if (traj.size() < 2) throw std::invalid_argument("trajectory has fewer than two points");
  if (observation_points.empty()) throw std::invalid_argument("no observation points");
  for (PointIndex z : observation_points) {
    if (z >= space.size() || !v.finite(z)) {
      throw std::invalid_argument(fmt::format("observation point {} is not in X0", z));
    }
  }
  EviReport report;
  report.kappa = kappa;
  report.form = EviForm::Differential;
  for (std::size_t k = 0; k + 1 < traj.size(); ++k) {
    const PointIndex x = traj.points[k], next = traj.points[k + 1];
    for (PointIndex z : observation_points) {
      const double d2 = space.squared_distance(x, z);
      const double derivative = (space.squared_distance(next, z) - d2) / (2.0 * traj.tau);
      const double residual = derivative + 0.5 * kappa * d2 - v(z) + v(x);
      update(report, residual, traj.times[k], traj.times[k + 1], fmt::format("point {}", z));
    }
  }
  return report;
}

double evi_prefactor(double kappa, double s, double t) {
  if (kappa == 0.0) return t - s;
  return (std::exp(kappa * t) - std::exp(kappa * s)) / kappa;
}

EviReport evi_integral_residual(const MetricMeasureSpace& space, const MeasureTrajectory& traj,
                                const Potential& v, double kappa, const ProbabilityMeasure& nu,
                                std::span<const std::pair<std::size_t, std::size_t>> time_pairs) {
  EviReport report;
  report.kappa = kappa;
  report.form = EviForm::Integral;
  const double s_nu = potential_energy(v, nu);
  if (s_nu == kInfinity) {
    report.vacuous = true;
    report.max_residual = 0.0;
    report.witness_observation = "nu";
    return report;
  }
  // W2^2(mu_k, nu) is shared between pairs; compute each once.
  std::map<std::size_t, double> w2sq;
  const auto distance_sq = [&](std::size_t k) {
    const auto it = w2sq.find(k);
    if (it != w2sq.end()) return it->second;
    const double w = wasserstein2(space, traj.measures[k], nu);
    w2sq.emplace(k, w * w);
    return w * w;
  };
  for (const auto& [a, b] : time_pairs) {
    if (!(a < b) || b >= traj.size()) {
      throw std::invalid_argument(fmt::format("bad time pair ({}, {})", a, b));
    }
    const double s = traj.times[a], t = traj.times[b];
    const double s_mu = potential_energy(v, traj.measures[b]);
    const double residual = 0.5 * distance_sq(b) * std::exp(kappa * t) -
                            0.5 * distance_sq(a) * std::exp(kappa * s) -
                            evi_prefactor(kappa, s, t) * (s_nu - s_mu);
    update(report, residual, s, t, "nu");
  }
  if (report.evaluations == 0) report.max_residual = 0.0;
  return report;
}

std::vector<std::pair<std::size_t, std::size_t>> strided_time_pairs(std::size_t length,
                                                                    std::size_t stride) {
  if (stride == 0) throw std::invalid_argument("stride must be positive");
  std::vector<std::size_t> grid;
  for (std::size_t k = 0; k < length; k += stride) grid.push_back(k);
  if (length > 0 && grid.back() != length - 1) grid.push_back(length - 1);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < grid.size(); ++i)
    for (std::size_t j = i + 1; j < grid.size(); ++j) pairs.emplace_back(grid[i], grid[j]);
  return pairs;
}

double contraction_residual(const MetricMeasureSpace& space, const FlowTrajectory& a,
                            const FlowTrajectory& b, double kappa) {
  require_same_grid(a.times, b.times, a.tau, b.tau);
  if (a.size() == 0) throw std::invalid_argument("empty trajectory");
  const double d0 = space.distance(a.points[0], b.points[0]);
  double worst = -kInfinity;
  for (std::size_t k = 0; k < a.size(); ++k) {
    worst = std::max(worst, space.distance(a.points[k], b.points[k]) -
                                std::exp(-kappa * a.times[k]) * d0);
  }
  return worst;
}

double contraction_residual(const MetricMeasureSpace& space, const MeasureTrajectory& a,
                            const MeasureTrajectory& b, double kappa) {
  require_same_grid(a.times, b.times, a.tau, b.tau);
  if (a.size() == 0) throw std::invalid_argument("empty trajectory");
  const double d0 = wasserstein2(space, a.measures[0], b.measures[0]);
  double worst = -kInfinity;
  for (std::size_t k = 0; k < a.size(); ++k) {
    worst = std::max(worst, wasserstein2(space, a.measures[k], b.measures[k]) -
                                std::exp(-kappa * a.times[k]) * d0);
  }
  return worst;
}

double descending_slope(const MetricMeasureSpace& space, const Potential& v, PointIndex x,
                        double radius) {
  if (x >= space.size()) throw std::invalid_argument(fmt::format("point {} out of range", x));
  if (!v.finite(x)) return kInfinity;
  const double reach = radius * (1.0 + 1e-12);
  double slope = 0.0;
  const auto offer = [&](PointIndex y) {
    if (y == x || !v.finite(y)) return;
    const double d = space.distance(x, y);
    if (d > 0.0 && d <= reach) slope = std::max(slope, std::max(v(x) - v(y), 0.0) / d);
  };
  const std::size_t n = space.size();
  switch (space.kind()) {
    case SpaceKind::Interval: {
      const std::size_t o_max = space.offsets_within(radius);
      for (std::size_t o = 1; o <= o_max; ++o) {
        if (x >= o) offer(x - o);
        if (x + o < n) offer(x + o);
      }
      break;
    }
    case SpaceKind::Circle: {
      const std::size_t o_max = std::min(space.offsets_within(radius), n / 2);
      for (std::size_t o = 1; o <= o_max; ++o) {
        offer((x + o) % n);
        offer((x + n - o) % n);
      }
      break;
    }
    case SpaceKind::Graph:
      for (PointIndex y = 0; y < n; ++y) offer(y);
      break;
  }
  return slope;
}

double default_slope_radius(const MetricMeasureSpace& space) {
  if (space.kind() == SpaceKind::Graph && space.size() <= kExhaustiveTriangleLimit) {
    return space.diameter();
  }
  return 2.0 * space.resolution();
}

DissipationReport dissipation_report(const MetricMeasureSpace& space, const FlowTrajectory& traj,
                                     const Potential& v, std::optional<double> slope_radius) {
  if (traj.size() < 2) throw std::invalid_argument("trajectory has fewer than two points");
  DissipationReport report;
  report.slope_radius = slope_radius.value_or(default_slope_radius(space));
  const std::size_t len = traj.size();
  const double tau = traj.tau;

  for (std::size_t k = 0; k < len; ++k) {
    report.descending_slope.push_back(descending_slope(space, v, traj.points[k], report.slope_radius));
  }
  for (std::size_t k = 0; k + 1 < len; ++k) {
    report.metric_speed.push_back(space.distance(traj.points[k + 1], traj.points[k]) / tau);
    const double increase = traj.potential_values[k + 1] - traj.potential_values[k];
    if (increase > 0.0) {
      report.monotone = false;
      report.max_increase = std::max(report.max_increase, increase);
    }
  }

  // A_k = V(x_k) + 1/2 sum_{r<k} tau (speed_r^2 + slope(x_{r+1})^2); the
  // identity residual over s < t is |A_t - A_s|, so its maximum is the range
  // of A. The slope is taken at the end of each step, as in the implicit step.
  double dissipated = 0.0;
  double a_min = traj.potential_values[0], a_max = a_min;
  for (std::size_t k = 1; k < len; ++k) {
    const double speed = report.metric_speed[k - 1], slope = report.descending_slope[k];
    dissipated += 0.5 * tau * (speed * speed + slope * slope);
    report.lhs.push_back(traj.potential_values[k]);
    report.rhs.push_back(traj.potential_values[0] - dissipated);
    const double a = traj.potential_values[k] + dissipated;
    a_min = std::min(a_min, a);
    a_max = std::max(a_max, a);
  }
  report.max_identity_residual = a_max - a_min;
  return report;
}

double variance_decay_residual(const MeasureTrajectory& traj, double kappa) {
  if (traj.variances.empty()) throw std::invalid_argument("empty trajectory");
  double worst = -kInfinity;
  for (std::size_t k = 0; k < traj.variances.size(); ++k) {
    worst = std::max(worst, traj.variances[k] * std::exp(2.0 * kappa * traj.times[k]) -
                                traj.variances[0]);
  }
  return worst;
}

namespace {

// sum_i w_i mu_i with masses on a common point combined by canonical_sum.
ProbabilityMeasure mix(std::size_t n, std::span<const double> weights,
                       std::span<const ProbabilityMeasure* const> measures) {
  std::vector<std::vector<double>> terms(n);
  for (std::size_t c = 0; c < measures.size(); ++c) {
    for (PointIndex p : measures[c]->support()) terms[p].push_back(weights[c] * (*measures[c])[p]);
  }
  std::vector<double> w(n, 0.0);
  for (PointIndex p = 0; p < n; ++p)
    if (!terms[p].empty()) w[p] = canonical_sum(std::move(terms[p]));
  return ProbabilityMeasure(std::move(w));
}

}  // namespace

double additivity_residual(const MetricMeasureSpace& space, const Potential& v,
                           const FunctionalSpec& spec, std::span<const MixtureComponent> components,
                           const FlowParams& params) {
  if (components.empty()) throw std::invalid_argument("no mixture components");
  std::vector<double> weights;
  for (const auto& c : components) {
    if (!(c.weight > 0.0)) throw std::invalid_argument("mixture weights must be positive");
    if (c.measure.size() != space.size()) throw std::invalid_argument("component does not match the space");
    weights.push_back(c.weight);
  }
  if (std::abs(canonical_sum(weights) - 1.0) > ProbabilityMeasure::kMassTolerance) {
    throw std::invalid_argument("mixture weights do not sum to 1");
  }

  std::vector<const ProbabilityMeasure*> initial;
  for (const auto& c : components) initial.push_back(&c.measure);
  const ProbabilityMeasure mixture = mix(space.size(), weights, initial);

  const MeasureTrajectory joint = run_measure_flow(space, v, spec, mixture, params);
  std::vector<MeasureTrajectory> parts;
  for (const auto& c : components) parts.push_back(run_measure_flow(space, v, spec, c.measure, params));

  double worst = 0.0;
  std::vector<const ProbabilityMeasure*> at_time(parts.size());
  for (std::size_t k = 0; k < joint.size(); ++k) {
    for (std::size_t c = 0; c < parts.size(); ++c) at_time[c] = &parts[c].measures[k];
    worst = std::max(worst, wasserstein2(space, joint.measures[k], mix(space.size(), weights, at_time)));
  }
  return worst;
}

ReparamResult level_reparametrization(const FlowTrajectory& traj, double a) {
  ReparamResult result;
  result.level = a;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    if (traj.potential_values[k] <= a) {
      result.hitting_time = traj.times[k];
      result.step = k;
      result.point = traj.points[k];
      break;
    }
  }
  return result;
}

double reparam_contraction_residual(const MetricMeasureSpace& space, const FlowTrajectory& a,
                                    const FlowTrajectory& b, double kappa, double level) {
  if (a.size() == 0 || b.size() == 0) throw std::invalid_argument("empty trajectory");
  const ReparamResult ra = level_reparametrization(a, level);
  const ReparamResult rb = level_reparametrization(b, level);
  if (!ra.point || !rb.point) {
    throw NotApplicableError(
        fmt::format("level {} is not reached within the horizon (T_a = {}, {})", level,
                    ra.hitting_time, rb.hitting_time));
  }
  return space.distance(*ra.point, *rb.point) -
         std::exp(-kappa * (ra.hitting_time + rb.hitting_time) / 2.0) *
             space.distance(a.points[0], b.points[0]);
}

}  // namespace eviflow
