#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "eviflow/functionals.hpp"
#include "eviflow/space.hpp"
#include "eviflow/transport.hpp"

namespace eviflow {

struct FlowParams {
  double tau = 0.01;                // step size
  double horizon = 1.0;             // total time T
  double kappa = 0.0;               // convexity modulus of V
  double ricci_lower_bound = 0.0;   // K, enters kappa_n = K/n + kappa
  double solver_tolerance = 1e-4;   // regularized JKO stopping and smoothing knob
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument unless 0 < tau <= horizon and the solver
  /// tolerance is positive.
  void validate() const;
  /// round(horizon / tau).
  std::size_t steps() const;
};

struct FlowTrajectory {
  double tau = 0.0;
  double kappa = 0.0;
  std::vector<double> times;  // k * tau
  std::vector<PointIndex> points;
  std::vector<double> potential_values;

  std::size_t size() const noexcept { return points.size(); }
};

struct MeasureTrajectory {
  double tau = 0.0;
  double kappa = 0.0;
  std::vector<double> times;
  std::vector<ProbabilityMeasure> measures;
  std::vector<double> energies;   // S or S_n at each time
  std::vector<double> variances;  // Var2 at each time

  std::size_t size() const noexcept { return measures.size(); }
};

/// F(mu) = sum V mu.
struct PurePotential {};
/// F(mu) = Ent(mu|m)/n + sum V mu.
struct Regularized {
  double n;
};
using FunctionalSpec = std::variant<PurePotential, Regularized>;

double evaluate_functional(const MetricMeasureSpace& space, const Potential& v,
                           const FunctionalSpec& spec, const ProbabilityMeasure& mu);

/// argmin_y d^2(y, x)/(2 tau) + V(y) over X0, ties to the smallest index.
PointIndex proximal_point_step(const MetricMeasureSpace& space, const Potential& v, PointIndex x,
                               double tau);

/// True for points of X0 and for +inf points within one grid step of X0.
bool admissible_start(const MetricMeasureSpace& space, const Potential& v, PointIndex x);

/// Iterates the proximal step steps() times from x0.
FlowTrajectory run_point_flow(const MetricMeasureSpace& space, const Potential& v, PointIndex x0,
                              const FlowParams& params);

/// Diagnostics of one regularized JKO solve.
struct JkoSolve {
  ProbabilityMeasure measure;
  double objective;   // plan cost / (2 tau) + S_n(measure), an upper bound on the JKO objective
  double smoothing;   // entropic smoothing used by the inner solver
  int iterations;
};

/// Regularized JKO step in coupling space: plans with first marginal mu,
/// generalized Sinkhorn with a closed-form KL prox on the second marginal.
JkoSolve regularized_jko_step(const MetricMeasureSpace& space, const Potential& v, double n,
                              const ProbabilityMeasure& mu, double tau, double solver_tolerance,
                              int max_iter = 100000);

/// One minimizing-movement step: argmin_nu W2^2(nu, mu)/(2 tau) + F(nu).
/// The pure-potential path pushes every atom through the proximal map and is
/// exact; the regularized path delegates to regularized_jko_step.
ProbabilityMeasure jko_step(const MetricMeasureSpace& space, const Potential& v,
                            const FunctionalSpec& spec, const ProbabilityMeasure& mu, double tau,
                            double solver_tolerance);

/// W2^2(nu, mu)/(2 tau) + F(nu) with the exact transport cost.
double jko_objective(const MetricMeasureSpace& space, const Potential& v,
                     const FunctionalSpec& spec, const ProbabilityMeasure& mu,
                     const ProbabilityMeasure& nu, double tau);

/// Iterates jko_step. The pure-potential path tracks the initial atoms so
/// that it agrees bit for bit with pushforward_flow.
MeasureTrajectory run_measure_flow(const MetricMeasureSpace& space, const Potential& v,
                                   const FunctionalSpec& spec, const ProbabilityMeasure& mu0,
                                   const FlowParams& params);

/// kappa_n = K / n + kappa.
double regularized_kappa(double ricci_lower_bound, double kappa, double n);

struct RegularizedRun {
  double n;
  double kappa_n;
  MeasureTrajectory trajectory;
};

/// One S_n trajectory per entry of n_list, computed concurrently.
std::vector<RegularizedRun> run_regularized_family(const MetricMeasureSpace& space,
                                                   const Potential& v,
                                                   const ProbabilityMeasure& mu0,
                                                   const FlowParams& params,
                                                   std::span<const double> n_list);

/// mu_t = (Phi_t)_* mu0 with Phi_t the point flow; weights are never split.
MeasureTrajectory pushforward_flow(const MetricMeasureSpace& space, const Potential& v,
                                   const ProbabilityMeasure& mu0, const FlowParams& params);

/// Point of maximum mass at each time, provided Var2 <= tol throughout.
/// Throws NotConcentratedError at the first time where it is not.
FlowTrajectory extract_dirac_trajectory(const MetricMeasureSpace& space, const Potential& v,
                                        const MeasureTrajectory& trajectory, double tol);

/// Sum of the terms in ascending order. Independent of the order the terms
/// are supplied in, which keeps merged atom masses reproducible.
double canonical_sum(std::vector<double> terms);

}  // namespace eviflow
