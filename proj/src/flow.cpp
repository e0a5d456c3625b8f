#include "eviflow/flow.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <optional>
#include <stdexcept>
#include <unordered_map>

#include <fmt/format.h>

#include "eviflow/errors.hpp"
#include "eviflow/kernels.hpp"

namespace eviflow {

void FlowParams::validate() const {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw std::invalid_argument(fmt::format("step size {} is not positive", tau));
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw std::invalid_argument(fmt::format("horizon {} is not positive", horizon));
  }
  if (tau > horizon * (1.0 + 1e-12)) {
    throw std::invalid_argument(fmt::format("step size {} exceeds horizon {}", tau, horizon));
  }
  if (!(solver_tolerance > 0.0)) {
    throw std::invalid_argument(fmt::format("solver tolerance {} is not positive", solver_tolerance));
  }
}

std::size_t FlowParams::steps() const {
  return static_cast<std::size_t>(std::llround(horizon / tau));
}

double canonical_sum(std::vector<double> terms) {
  std::sort(terms.begin(), terms.end());
  double sum = 0.0;
  for (double t : terms) sum += t;
  return sum;
}

double evaluate_functional(const MetricMeasureSpace& space, const Potential& v,
                           const FunctionalSpec& spec, const ProbabilityMeasure& mu) {
  if (const auto* reg = std::get_if<Regularized>(&spec)) {
    return regularized_energy(space, v, mu, reg->n);
  }
  return potential_energy(v, mu);
}

PointIndex proximal_point_step(const MetricMeasureSpace& space, const Potential& v, PointIndex x,
                               double tau) {
  if (x >= space.size()) throw std::invalid_argument(fmt::format("point {} out of range", x));
  if (!(tau > 0.0)) throw std::invalid_argument("step size must be positive");
  if (v.size() != space.size()) throw std::invalid_argument("potential does not match the space");
  const auto best = kernels::omp::proximal_argmin(space, v.values(), x, tau);
  if (!std::isfinite(best.value)) throw std::invalid_argument("potential is +inf everywhere");
  return best.index;
}

bool admissible_start(const MetricMeasureSpace& space, const Potential& v, PointIndex x) {
  if (x >= space.size()) return false;
  if (v.finite(x)) return true;
  const double reach = space.resolution() * (1.0 + 1e-9);
  for (PointIndex y : v.finite_set())
    if (space.distance(x, y) <= reach) return true;
  return false;
}

namespace {

void require_admissible(const MetricMeasureSpace& space, const Potential& v, PointIndex x) {
  if (!admissible_start(space, v, x)) {
    throw std::invalid_argument(fmt::format("start point {} is not in the closure of X0", x));
  }
}

std::vector<double> time_grid(const FlowParams& params) {
  std::vector<double> times(params.steps() + 1);
  for (std::size_t k = 0; k < times.size(); ++k) times[k] = static_cast<double>(k) * params.tau;
  return times;
}

// Proximal map with memoisation; the step is deterministic so caching does
// not change any result.
class ProximalMap {
 public:
  ProximalMap(const MetricMeasureSpace& space, const Potential& v, double tau)
      : space_(space), v_(v), tau_(tau) {}

  PointIndex operator()(PointIndex x) {
    const auto it = cache_.find(x);
    if (it != cache_.end()) return it->second;
    const PointIndex y = proximal_point_step(space_, v_, x, tau_);
    cache_.emplace(x, y);
    return y;
  }

 private:
  const MetricMeasureSpace& space_;
  const Potential& v_;
  double tau_;
  std::unordered_map<PointIndex, PointIndex> cache_;
};

// Measure carried by atoms at the given positions. Masses landing on the same
// point are combined with canonical_sum so the result depends only on the
// multiset of (position, mass) pairs.
ProbabilityMeasure assemble(std::size_t n, std::span<const PointIndex> positions,
                            std::span<const double> masses) {
  std::map<PointIndex, std::vector<double>> grouped;
  for (std::size_t a = 0; a < positions.size(); ++a) grouped[positions[a]].push_back(masses[a]);
  std::vector<double> w(n, 0.0);
  for (auto& [p, terms] : grouped) w[p] = canonical_sum(std::move(terms));
  return ProbabilityMeasure(std::move(w));
}

void record(MeasureTrajectory& out, const MetricMeasureSpace& space, const Potential& v,
            const FunctionalSpec& spec, ProbabilityMeasure mu) {
  out.energies.push_back(evaluate_functional(space, v, spec, mu));
  out.variances.push_back(variance2(space, mu));
  out.measures.push_back(std::move(mu));
}

}  // namespace

FlowTrajectory run_point_flow(const MetricMeasureSpace& space, const Potential& v, PointIndex x0,
                              const FlowParams& params) {
  params.validate();
  require_admissible(space, v, x0);
  FlowTrajectory traj;
  traj.tau = params.tau;
  traj.kappa = params.kappa;
  traj.times = time_grid(params);
  traj.points.reserve(traj.times.size());
  traj.potential_values.reserve(traj.times.size());
  PointIndex x = x0;
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    if (k > 0) x = proximal_point_step(space, v, x, params.tau);
    traj.points.push_back(x);
    traj.potential_values.push_back(v(x));
  }
  return traj;
}

ProbabilityMeasure jko_step(const MetricMeasureSpace& space, const Potential& v,
                            const FunctionalSpec& spec, const ProbabilityMeasure& mu, double tau,
                            double solver_tolerance) {
  if (mu.size() != space.size()) throw std::invalid_argument("measure does not match the space");
  if (const auto* reg = std::get_if<Regularized>(&spec)) {
    return regularized_jko_step(space, v, reg->n, mu, tau, solver_tolerance).measure;
  }
  const auto atoms = mu.support();
  std::vector<PointIndex> moved(atoms.size());
  std::vector<double> masses(atoms.size());
  for (std::size_t a = 0; a < atoms.size(); ++a) {
    moved[a] = proximal_point_step(space, v, atoms[a], tau);
    masses[a] = mu[atoms[a]];
  }
  return assemble(space.size(), moved, masses);
}

double jko_objective(const MetricMeasureSpace& space, const Potential& v,
                     const FunctionalSpec& spec, const ProbabilityMeasure& mu,
                     const ProbabilityMeasure& nu, double tau) {
  const double energy = evaluate_functional(space, v, spec, nu);
  if (energy == kInfinity) return kInfinity;
  const double w2 = (mu == nu) ? 0.0 : w2_exact(space, mu, nu).squared_cost;
  return w2 / (2.0 * tau) + energy;
}

MeasureTrajectory run_measure_flow(const MetricMeasureSpace& space, const Potential& v,
                                   const FunctionalSpec& spec, const ProbabilityMeasure& mu0,
                                   const FlowParams& params) {
  params.validate();
  if (mu0.size() != space.size()) throw std::invalid_argument("measure does not match the space");
  MeasureTrajectory traj;
  traj.tau = params.tau;
  traj.kappa = params.kappa;
  traj.times = time_grid(params);

  if (std::holds_alternative<PurePotential>(spec)) {
    const auto atoms = mu0.support();
    std::vector<PointIndex> positions(atoms.begin(), atoms.end());
    std::vector<double> masses;
    for (PointIndex p : atoms) {
      require_admissible(space, v, p);
      masses.push_back(mu0[p]);
    }
    ProximalMap prox(space, v, params.tau);
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
      if (k > 0) {
        for (auto& p : positions) p = prox(p);
      }
      record(traj, space, v, spec, k == 0 ? mu0 : assemble(space.size(), positions, masses));
    }
    return traj;
  }

  ProbabilityMeasure mu = mu0;
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    if (k > 0) mu = jko_step(space, v, spec, mu, params.tau, params.solver_tolerance);
    record(traj, space, v, spec, mu);
  }
  return traj;
}

double regularized_kappa(double ricci_lower_bound, double kappa, double n) {
  if (!(n > 0.0)) throw std::invalid_argument("regularization index n must be positive");
  return ricci_lower_bound / n + kappa;
}

std::vector<RegularizedRun> run_regularized_family(const MetricMeasureSpace& space,
                                                   const Potential& v,
                                                   const ProbabilityMeasure& mu0,
                                                   const FlowParams& params,
                                                   std::span<const double> n_list) {
  if (n_list.empty()) throw std::invalid_argument("n_list is empty");
  params.validate();
  for (double n : n_list)
    if (!(n > 0.0)) throw std::invalid_argument(fmt::format("regularization index {} is not positive", n));

  std::vector<std::optional<MeasureTrajectory>> trajectories(n_list.size());
  std::vector<std::exception_ptr> errors(n_list.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n_list.size()); ++i) {
    try {
      trajectories[i] = run_measure_flow(space, v, Regularized{n_list[i]}, mu0, params);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<RegularizedRun> runs;
  for (std::size_t i = 0; i < n_list.size(); ++i) {
    const double n = n_list[i];
    runs.push_back({n, regularized_kappa(params.ricci_lower_bound, params.kappa, n),
                    std::move(*trajectories[i])});
    runs.back().trajectory.kappa = runs.back().kappa_n;
  }
  return runs;
}

MeasureTrajectory pushforward_flow(const MetricMeasureSpace& space, const Potential& v,
                                   const ProbabilityMeasure& mu0, const FlowParams& params) {
  params.validate();
  if (mu0.size() != space.size()) throw std::invalid_argument("measure does not match the space");
  const auto atoms = mu0.support();
  std::vector<FlowTrajectory> paths;
  std::vector<double> masses;
  for (PointIndex p : atoms) {
    paths.push_back(run_point_flow(space, v, p, params));
    masses.push_back(mu0[p]);
  }

  MeasureTrajectory traj;
  traj.tau = params.tau;
  traj.kappa = params.kappa;
  traj.times = time_grid(params);
  std::vector<PointIndex> positions(atoms.size());
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    for (std::size_t a = 0; a < atoms.size(); ++a) positions[a] = paths[a].points[k];
    record(traj, space, v, PurePotential{},
           k == 0 ? mu0 : assemble(space.size(), positions, masses));
  }
  return traj;
}

FlowTrajectory extract_dirac_trajectory(const MetricMeasureSpace& space, const Potential& v,
                                        const MeasureTrajectory& trajectory, double tol) {
  if (!(tol >= 0.0)) throw std::invalid_argument("concentration tolerance must be nonnegative");
  FlowTrajectory out;
  out.tau = trajectory.tau;
  out.kappa = trajectory.kappa;
  out.times = trajectory.times;
  for (std::size_t k = 0; k < trajectory.size(); ++k) {
    const auto& mu = trajectory.measures[k];
    const double var = variance2(space, mu);
    if (var > tol) {
      throw NotConcentratedError(
          fmt::format("measure at t = {} has Var2 = {:.6g} > {}", trajectory.times[k], var, tol),
          trajectory.times[k], var);
    }
    const auto weights = mu.weights();
    const auto heaviest = static_cast<PointIndex>(
        std::max_element(weights.begin(), weights.end()) - weights.begin());
    out.points.push_back(heaviest);
    out.potential_values.push_back(v(heaviest));
  }
  return out;
}

}  // namespace eviflow
