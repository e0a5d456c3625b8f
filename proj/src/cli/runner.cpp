#include "eviflow/cli/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>

#include "eviflow/errors.hpp"
#include "eviflow/io.hpp"
#include "eviflow/verify.hpp"

namespace eviflow::cli {

using json = nlohmann::ordered_json;

bool SuiteResult::pass() const noexcept {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
}

std::filesystem::path output_directory(const Scenario& scenario, const RunOptions& options) {
  if (options.out_root) return *options.out_root / scenario.name;
  return scenario.output_dir;
}

namespace {

json real_or_null(double x) { return std::isfinite(x) ? json(x) : json(format_real(x)); }

// Builds the space, potential and trajectories a scenario needs, each at most
// once.
class Context {
 public:
  explicit Context(const Scenario& s)
      : s_(s), space_(build_space(s)), v_(build_potential(s, space_)) {
    for (double c : s.starts) starts_.push_back(space_.nearest_point(c));
    for (double c : s.second_starts) second_starts_.push_back(space_.nearest_point(c));
  }

  const Scenario& scenario() const { return s_; }
  const MetricMeasureSpace& space() const { return space_; }
  const Potential& potential() const { return v_; }
  const std::vector<PointIndex>& starts() const { return starts_; }

  bool regularized() const { return s_.functional == "regularized"; }
  FunctionalSpec functional() const {
    if (regularized()) return Regularized{s_.n};
    return PurePotential{};
  }
  // Modulus attached to the scenario's functional.
  double kappa() const {
    return regularized() ? regularized_kappa(s_.flow.ricci_lower_bound, s_.flow.kappa, s_.n)
                         : s_.flow.kappa;
  }

  const FlowTrajectory& point_flow(std::size_t i) {
    if (point_flows_.empty()) {
      for (PointIndex p : starts_) point_flows_.push_back(run_point_flow(space_, v_, p, s_.flow));
    }
    return point_flows_.at(i);
  }
  const std::vector<FlowTrajectory>& point_flows() {
    point_flow(0);
    return point_flows_;
  }

  const ProbabilityMeasure& initial() {
    if (!initial_) initial_ = mixture(starts_, s_.weights);
    return *initial_;
  }
  const ProbabilityMeasure& second_initial() {
    if (!second_initial_) second_initial_ = mixture(second_starts_, s_.second_weights);
    return *second_initial_;
  }

  // Flow of the scenario's functional from the initial mixture.
  const MeasureTrajectory& measure_flow() {
    if (!measure_flow_) measure_flow_ = run_measure_flow(space_, v_, functional(), initial(), s_.flow);
    return *measure_flow_;
  }
  const MeasureTrajectory& second_measure_flow() {
    if (!second_flow_) {
      second_flow_ = run_measure_flow(space_, v_, functional(), second_initial(), s_.flow);
    }
    return *second_flow_;
  }
  const MeasureTrajectory& pushforward() {
    if (!pushforward_) pushforward_ = pushforward_flow(space_, v_, initial(), s_.flow);
    return *pushforward_;
  }
  const std::vector<RegularizedRun>& family() {
    if (!family_) family_ = run_regularized_family(space_, v_, initial(), s_.flow, s_.n_list);
    return *family_;
  }

  std::vector<double> mixture_weights(std::size_t count, const std::vector<double>& given) const {
    std::vector<double> w = given.empty() ? std::vector<double>(count, 1.0) : given;
    const double total = canonical_sum(w);
    for (auto& x : w) x /= total;
    return w;
  }

 private:
  ProbabilityMeasure mixture(const std::vector<PointIndex>& at, const std::vector<double>& given) {
    const auto w = mixture_weights(at.size(), given);
    std::map<PointIndex, std::vector<double>> grouped;
    for (std::size_t i = 0; i < at.size(); ++i) grouped[at[i]].push_back(w[i]);
    std::vector<double> weights(space_.size(), 0.0);
    for (auto& [p, terms] : grouped) weights[p] = canonical_sum(std::move(terms));
    return ProbabilityMeasure::normalized(std::move(weights));
  }

  const Scenario& s_;
  MetricMeasureSpace space_;
  Potential v_;
  std::vector<PointIndex> starts_, second_starts_;
  std::vector<FlowTrajectory> point_flows_;
  std::optional<ProbabilityMeasure> initial_, second_initial_;
  std::optional<MeasureTrajectory> measure_flow_, second_flow_, pushforward_;
  std::optional<std::vector<RegularizedRun>> family_;
};

std::vector<PointIndex> observation_points(const Potential& v, std::size_t count) {
  const auto domain = v.finite_set();
  if (count >= domain.size()) return {domain.begin(), domain.end()};
  std::vector<PointIndex> out;
  for (std::size_t i = 0; i < count; ++i) {
    const double pos = count == 1 ? 0.0
                                  : static_cast<double>(i) * static_cast<double>(domain.size() - 1) /
                                        static_cast<double>(count - 1);
    out.push_back(domain[static_cast<std::size_t>(std::llround(pos))]);
  }
  return out;
}

void require_pure(const Context& ctx, const std::string& check) {
  if (ctx.regularized()) {
    throw NotApplicableError(check + " is defined for the pure potential functional only");
  }
}

double evaluate(Context& ctx, const std::string& name, CheckResult& out) {
  const auto& s = ctx.scenario();
  const auto& space = ctx.space();
  const auto& v = ctx.potential();
  auto& w = out.witness;
  auto& p = out.params;

  if (name == "evi_differential") {
    const auto obs = observation_points(v, s.verify.observation_points);
    p["kappa"] = s.flow.kappa;
    p["observation_points"] = obs.size();
    double worst = -kInfinity;
    for (std::size_t i = 0; i < ctx.starts().size(); ++i) {
      const auto r = evi_differential_residual(space, ctx.point_flow(i), v, s.flow.kappa, obs);
      if (r.max_residual > worst) {
        worst = r.max_residual;
        w = {{"start", s.starts[i]}, {"t", r.witness_time}, {"observation", r.witness_observation}};
      }
    }
    return worst;
  }
  if (name == "evi_integral" || name == "evi_integral_flat") {
    require_pure(ctx, name);
    const double kappa = name == "evi_integral" ? s.flow.kappa : 0.0;
    const auto nu = ProbabilityMeasure::dirac(space.size(), space.nearest_point(s.verify.nu));
    const auto& traj = ctx.pushforward();
    const auto pairs = strided_time_pairs(traj.size(), s.verify.pair_stride);
    const auto r = evi_integral_residual(space, traj, v, kappa, nu, pairs);
    p["kappa"] = kappa;
    p["nu"] = s.verify.nu;
    p["pair_stride"] = s.verify.pair_stride;
    w = {{"s", r.witness_time}, {"t", r.witness_end_time}, {"vacuous", r.vacuous}};
    return r.max_residual;
  }
  if (name == "contraction") {
    p["kappa"] = s.flow.kappa;
    w = {{"starts", {s.starts[0], s.starts[1]}}};
    return contraction_residual(space, ctx.point_flow(0), ctx.point_flow(1), s.flow.kappa);
  }
  if (name == "contraction_measure") {
    p["kappa"] = ctx.kappa();
    return contraction_residual(space, ctx.measure_flow(), ctx.second_measure_flow(), ctx.kappa());
  }
  if (name == "dissipation" || name == "monotonicity") {
    double identity = 0.0, increase = 0.0;
    for (std::size_t i = 0; i < ctx.starts().size(); ++i) {
      const auto r = dissipation_report(space, ctx.point_flow(i), v, s.verify.slope_radius);
      p["slope_radius"] = r.slope_radius;
      if (r.max_identity_residual >= identity) {
        identity = r.max_identity_residual;
        if (name == "dissipation") w = {{"start", s.starts[i]}};
      }
      if (r.max_increase >= increase) {
        increase = r.max_increase;
        if (name == "monotonicity") w = {{"start", s.starts[i]}};
      }
    }
    return name == "dissipation" ? identity : increase;
  }
  if (name == "variance_decay") {
    p["kappa"] = ctx.kappa();
    return variance_decay_residual(ctx.measure_flow(), ctx.kappa());
  }
  if (name == "dirac_preservation") {
    double worst = 0.0;
    for (std::size_t i = 0; i < ctx.starts().size(); ++i) {
      const auto traj = run_measure_flow(space, v, PurePotential{},
                                         ProbabilityMeasure::dirac(space.size(), ctx.starts()[i]), s.flow);
      const double var = *std::max_element(traj.variances.begin(), traj.variances.end());
      if (var >= worst) {
        worst = var;
        w = {{"start", s.starts[i]}};
      }
    }
    return worst;
  }
  if (name == "additivity") {
    const auto weights = ctx.mixture_weights(ctx.starts().size(), s.weights);
    std::vector<MixtureComponent> components;
    for (std::size_t i = 0; i < ctx.starts().size(); ++i) {
      components.push_back({weights[i], ProbabilityMeasure::dirac(space.size(), ctx.starts()[i])});
    }
    p["components"] = components.size();
    return additivity_residual(space, v, ctx.functional(), components, s.flow);
  }
  if (name == "pushforward") {
    const auto jko = run_measure_flow(space, v, PurePotential{}, ctx.initial(), s.flow);
    const auto& push = ctx.pushforward();
    double worst = 0.0;
    for (std::size_t k = 0; k < jko.size(); ++k) {
      worst = std::max(worst, wasserstein2(space, jko.measures[k], push.measures[k]));
    }
    return worst;
  }
  if (name == "level_hitting_time" || name == "reparam_contraction") {
    p["level"] = s.verify.level;
    if (name == "reparam_contraction") {
      p["kappa"] = s.flow.kappa;
      w = {{"starts", {s.starts[0], s.starts[1]}}};
      return reparam_contraction_residual(space, ctx.point_flow(0), ctx.point_flow(1), s.flow.kappa,
                                          s.verify.level);
    }
    const auto r = level_reparametrization(ctx.point_flow(0), s.verify.level);
    p["expected"] = *s.verify.expected_hitting_time;
    w = {{"start", s.starts[0]}, {"hitting_time", real_or_null(r.hitting_time)}};
    return std::abs(r.hitting_time - *s.verify.expected_hitting_time);
  }
  if (name == "convexity") {
    const double kappa = s.verify.convexity_kappa.value_or(s.flow.kappa);
    const auto r = kappa_convexity_report(space, v, kappa, s.verify.convexity_budget, s.flow.seed);
    p["kappa"] = kappa;
    p["slack"] = r.quantization_slack;
    p["samples"] = r.samples_checked;
    w = {{"x", r.witness.x}, {"y", r.witness.y}, {"t", r.witness.t}, {"z", r.witness.z},
         {"violation", real_or_null(r.worst_violation)}};
    return r.worst_violation - r.quantization_slack;
  }
  if (name == "regularization_monotone" || name == "dirac_concentration") {
    const auto& runs = ctx.family();
    json finals = json::array();
    for (const auto& run : runs) {
      finals.push_back({{"n", run.n}, {"kappa_n", run.kappa_n},
                        {"final_variance", run.trajectory.variances.back()}});
    }
    w = {{"runs", finals}};
    if (name == "regularization_monotone") {
      // Number of consecutive n values where Var2 at the horizon fails to
      // decrease strictly.
      double violations = 0.0;
      for (std::size_t i = 0; i + 1 < runs.size(); ++i) {
        if (!(runs[i + 1].trajectory.variances.back() < runs[i].trajectory.variances.back())) violations += 1.0;
      }
      return violations;
    }
    const auto largest = std::max_element(runs.begin(), runs.end(),
                                          [](const auto& a, const auto& b) { return a.n < b.n; });
    p["n"] = largest->n;
    return *std::max_element(largest->trajectory.variances.begin(), largest->trajectory.variances.end());
  }
  throw std::invalid_argument("unknown check " + name);
}

void log_line(std::ostream* log, const CheckResult& c) {
  if (!log) return;
  *log << fmt::format("{} {:<24} residual={:<24} tol={:<10} ({:.2f} s)\n", c.pass ? "PASS" : "FAIL",
                      c.name, format_real(c.residual), format_real(c.tolerance), c.runtime_seconds);
}

SuiteResult evaluate_with(Context& ctx, std::ostream* log) {
  const auto& s = ctx.scenario();
  SuiteResult result;
  result.scenario = s.name;
  for (const auto& check : s.checks) {
    CheckResult c;
    c.name = check.name;
    c.tolerance = check.tolerance;
    const auto start = std::chrono::steady_clock::now();
    try {
      c.residual = evaluate(ctx, check.name, c);
    } catch (const std::exception& e) {
      throw std::runtime_error(fmt::format("check {}: {}", check.name, e.what()));
    }
    c.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    c.pass = c.residual <= c.tolerance;
    log_line(log, c);
    result.checks.push_back(std::move(c));
  }
  return result;
}

Scenario with_seed(const Scenario& s, const RunOptions& options) {
  Scenario copy = s;
  if (options.seed) copy.flow.seed = *options.seed;
  return copy;
}

}  // namespace

void write_report_json(std::ostream& out, const SuiteResult& result) {
  json checks = json::array();
  for (const auto& c : result.checks) {
    json params = c.params;
    params["tolerance"] = c.tolerance;
    checks.push_back({{"check", c.name},
                      {"max_residual", real_or_null(c.residual)},
                      {"witness", c.witness},
                      {"params", params},
                      {"pass", c.pass}});
  }
  out << checks.dump(2) << '\n';
}

void write_suite_csv(std::ostream& out, const SuiteResult& result) {
  out << "check,residual,tolerance,pass\n";
  for (const auto& c : result.checks) {
    out << c.name << ',' << format_real(c.residual) << ',' << format_real(c.tolerance) << ','
        << (c.pass ? "true" : "false") << '\n';
  }
}

SuiteResult evaluate_checks(const Scenario& scenario, std::ostream* log) {
  Context ctx(scenario);
  return evaluate_with(ctx, log);
}

SuiteResult run_scenario(const Scenario& base, const RunOptions& options) {
  const Scenario scenario = with_seed(base, options);
  Context ctx(scenario);
  const auto dir = output_directory(scenario, options);
  if (options.write_outputs && scenario.write_trajectories) {
    for (std::size_t i = 0; i < ctx.starts().size(); ++i) {
      write_file_atomically(dir / fmt::format("point_flow_{}.csv", i), [&](std::ostream& out) {
        write_point_trajectory_csv(out, ctx.space(), ctx.point_flow(i));
      });
    }
    const auto& mflow = ctx.measure_flow();
    write_file_atomically(dir / "measure_flow.csv",
                          [&](std::ostream& out) { write_measure_trajectory_csv(out, mflow); });
    write_file_atomically(dir / "measure_summary.csv",
                          [&](std::ostream& out) { write_measure_summary_csv(out, mflow); });
    if (!scenario.n_list.empty()) {
      for (const auto& run : ctx.family()) {
        write_file_atomically(dir / fmt::format("regularized_n{}_summary.csv", run.n),
                              [&](std::ostream& out) { write_measure_summary_csv(out, run.trajectory); });
      }
    }
  }
  SuiteResult result = evaluate_with(ctx, options.quiet ? nullptr : &std::cout);
  result.output_dir = dir;
  if (options.write_outputs) {
    write_file_atomically(dir / "report.json", [&](std::ostream& out) { write_report_json(out, result); });
    write_file_atomically(dir / "suite.csv", [&](std::ostream& out) { write_suite_csv(out, result); });
  }
  return result;
}

void write_sweep_csv(std::ostream& out, const SweepResult& result) {
  out << result.axis << ",final_variance,final_energy";
  for (const auto& name : result.check_names) out << ',' << name;
  out << ",checks_pass\n";
  for (const auto& row : result.rows) {
    out << format_real(row.value) << ',' << format_real(row.final_variance) << ','
        << format_real(row.final_energy);
    for (double r : row.residuals) out << ',' << format_real(r);
    out << ',' << (row.checks_pass ? "true" : "false") << '\n';
  }
}

SweepResult run_sweep(const Scenario& base, const std::string& axis, const RunOptions& options) {
  const Scenario scenario = with_seed(base, options);
  const std::vector<double>* values = nullptr;
  if (axis == "n_list") values = &scenario.sweep.n_list;
  else if (axis == "tau_list") values = &scenario.sweep.tau_list;
  else if (axis == "h_list") values = &scenario.sweep.h_list;
  else throw std::invalid_argument("unknown sweep axis '" + axis + "' (n_list, tau_list, h_list)");
  if (values->empty()) throw std::invalid_argument("sweep axis " + axis + " is empty");

  SweepResult result;
  result.axis = axis;
  for (const auto& c : scenario.checks) result.check_names.push_back(c.name);

  for (double value : *values) {
    Scenario variant = scenario;
    if (axis == "n_list") {
      variant.functional = "regularized";
      variant.n = value;
    } else if (axis == "tau_list") {
      variant.flow.tau = value;
      variant.flow.validate();
    } else {
      if (variant.space.kind == "interval") {
        variant.space.points = static_cast<std::size_t>(std::llround((variant.space.hi - variant.space.lo) / value)) + 1;
      } else if (variant.space.kind == "circle") {
        variant.space.points = static_cast<std::size_t>(std::llround(2.0 * std::numbers::pi * variant.space.radius / value));
      } else {
        throw std::invalid_argument("h_list sweeps need an interval or circle space");
      }
    }
    if (!options.quiet) std::cout << fmt::format("-- {} = {}\n", axis, format_real(value));
    Context ctx(variant);
    const auto suite = evaluate_with(ctx, options.quiet ? nullptr : &std::cout);
    const auto& mflow = ctx.measure_flow();
    SweepRow row{value, mflow.variances.back(), mflow.energies.back(), {}, suite.pass()};
    for (const auto& c : suite.checks) row.residuals.push_back(c.residual);
    result.rows.push_back(std::move(row));
  }

  const auto column = [&](const std::string& name) -> std::vector<double> {
    std::vector<double> col;
    for (const auto& row : result.rows) {
      if (name == "final_variance") col.push_back(row.final_variance);
      else if (name == "final_energy") col.push_back(row.final_energy);
      else {
        const auto it = std::find(result.check_names.begin(), result.check_names.end(), name);
        if (it == result.check_names.end()) throw std::invalid_argument("unknown sweep column " + name);
        col.push_back(row.residuals[it - result.check_names.begin()]);
      }
    }
    return col;
  };
  for (const auto& name : scenario.sweep.assert_decreasing) {
    const auto col = column(name);
    for (std::size_t i = 0; i + 1 < col.size(); ++i) {
      if (!(col[i + 1] < col[i])) {
        result.failed_assertions.push_back(fmt::format("{} not strictly decreasing at row {}", name, i + 1));
      }
    }
  }
  for (const auto& name : scenario.sweep.assert_nonincreasing) {
    const auto col = column(name);
    for (std::size_t i = 0; i + 1 < col.size(); ++i) {
      if (col[i + 1] > col[i] + scenario.sweep.slack * std::abs(col[i])) {
        result.failed_assertions.push_back(fmt::format("{} increases at row {}", name, i + 1));
      }
    }
  }

  if (options.write_outputs) {
    write_file_atomically(output_directory(scenario, options) / fmt::format("sweep_{}.csv", axis),
                          [&](std::ostream& out) { write_sweep_csv(out, result); });
  }
  if (!options.quiet) {
    for (const auto& f : result.failed_assertions) std::cout << "ASSERTION FAILED " << f << '\n';
  }
  return result;
}

}  // namespace eviflow::cli
