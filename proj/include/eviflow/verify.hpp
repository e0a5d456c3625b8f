#pragma once

// Residuals of the gradient-flow inequalities over generated trajectories.
// Every function reports numbers only; tolerances belong to the caller.
//
// Convention: the modulus kappa enters the evolution variational inequality
// as (kappa/2) d^2, the normalisation under which a kappa-convex potential
// (V(z_t) <= (1-t)V(x) + tV(y) - kappa t(1-t) d^2/2) generates an EVI_kappa
// flow with contraction factor e^{-kappa t}.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "eviflow/flow.hpp"
#include "eviflow/functionals.hpp"
#include "eviflow/space.hpp"
#include "eviflow/transport.hpp"

namespace eviflow {

enum class EviForm { Differential, Integral };

struct EviReport {
  double max_residual = -kInfinity;
  double witness_time = 0.0;
  double witness_end_time = 0.0;   // integral form: t of the worst (s, t) pair
  std::string witness_observation;  // "point 17" or "nu"
  double kappa = 0.0;
  EviForm form = EviForm::Differential;
  bool vacuous = false;             // observation measure charges {V = inf}
  std::size_t evaluations = 0;
};

/// max over grid times t and observation points z of
///   [d^2(x_{t+tau}, z) - d^2(x_t, z)] / (2 tau) + (kappa/2) d^2(x_t, z) - V(z) + V(x_t).
EviReport evi_differential_residual(const MetricMeasureSpace& space, const FlowTrajectory& traj,
                                    const Potential& v, double kappa,
                                    std::span<const PointIndex> observation_points);

/// (e^{kappa t} - e^{kappa s}) / kappa, and t - s at kappa = 0.
double evi_prefactor(double kappa, double s, double t);

/// max over (s, t) index pairs of
///   W2^2(mu_t, nu) e^{kappa t}/2 - W2^2(mu_s, nu) e^{kappa s}/2 - P(s,t) [S(nu) - S(mu_t)].
EviReport evi_integral_residual(const MetricMeasureSpace& space, const MeasureTrajectory& traj,
                                const Potential& v, double kappa, const ProbabilityMeasure& nu,
                                std::span<const std::pair<std::size_t, std::size_t>> time_pairs);

/// Index pairs (s, t), s < t, on the sub-grid 0, stride, 2 stride, ..., with
/// the last time always included.
std::vector<std::pair<std::size_t, std::size_t>> strided_time_pairs(std::size_t length,
                                                                    std::size_t stride);

/// max_t D(t) - e^{-kappa t} D(0), D the point distance.
double contraction_residual(const MetricMeasureSpace& space, const FlowTrajectory& a,
                            const FlowTrajectory& b, double kappa);
/// Same with D the exact W2 distance between the measures.
double contraction_residual(const MetricMeasureSpace& space, const MeasureTrajectory& a,
                            const MeasureTrajectory& b, double kappa);

struct DissipationReport {
  std::vector<double> metric_speed;      // d(x_{k+1}, x_k) / tau, one per step
  std::vector<double> descending_slope;  // |grad^- V|(x_k), one per time
  std::vector<double> lhs;               // V(x_t) for t > 0
  std::vector<double> rhs;               // V(x_0) - 1/2 sum tau (speed^2 + slope^2)
  double max_identity_residual = 0.0;    // over all grid pairs s < t
  bool monotone = true;                  // V(x_{k+1}) <= V(x_k) exactly
  double max_increase = 0.0;
  double slope_radius = 0.0;
};

/// max over y != x with d(x,y) <= radius of (V(x) - V(y))^+ / d(x,y).
double descending_slope(const MetricMeasureSpace& space, const Potential& v, PointIndex x,
                        double radius);

/// 2 * resolution on grids and large graphs; the whole space on graphs with
/// at most 300 points.
double default_slope_radius(const MetricMeasureSpace& space);

DissipationReport dissipation_report(const MetricMeasureSpace& space, const FlowTrajectory& traj,
                                     const Potential& v,
                                     std::optional<double> slope_radius = std::nullopt);

/// max_t Var2(mu_t) e^{2 kappa t} - Var2(mu_0).
double variance_decay_residual(const MeasureTrajectory& traj, double kappa);

struct MixtureComponent {
  double weight;
  ProbabilityMeasure measure;
};

/// max_t W2(flow of the mixture at t, sum_i w_i (flow of component i at t)).
double additivity_residual(const MetricMeasureSpace& space, const Potential& v,
                           const FunctionalSpec& spec, std::span<const MixtureComponent> components,
                           const FlowParams& params);

struct ReparamResult {
  double level = 0.0;
  double hitting_time = kInfinity;
  std::optional<std::size_t> step;  // grid index of the hitting time
  std::optional<PointIndex> point;  // Psi_a(x)
};

/// First grid time with V(x_t) <= a.
ReparamResult level_reparametrization(const FlowTrajectory& traj, double a);

/// d(Psi_a(A), Psi_a(B)) - exp(-kappa (T_a(A) + T_a(B)) / 2) d(A_0, B_0).
/// Throws NotApplicableError when a hitting time is infinite.
double reparam_contraction_residual(const MetricMeasureSpace& space, const FlowTrajectory& a,
                                    const FlowTrajectory& b, double kappa, double level);

}  // namespace eviflow
