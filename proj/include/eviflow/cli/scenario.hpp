#pragma once

// Scenario files: INI/TOML-style sections of `key = value` lines.
//
//   name = quadratic
//   [space]      kind = interval | circle | graph; lo, hi, points | points, radius | file
//   [potential]  formula = quadratic | double_well | cosine | file; scale, center, file
//   [flow]       tau, horizon, kappa, ricci_lower_bound, solver_tolerance, seed,
//                functional = potential | regularized, n, n_list,
//                starts (coordinates), weights, second_starts, second_weights
//   [verify]     observation_points, pair_stride, nu, level, expected_hitting_time,
//                convexity_kappa, convexity_budget, slope_radius, concentration_tol
//   [checks]     <check name> = <tolerance>
//   [output]     dir, trajectories = true | false
//   [sweep]      n_list, tau_list, h_list, assert_decreasing, assert_nonincreasing, slack
//
// Lists are written `[1, 10, 100]`; strings may be quoted; `#` and `;` start
// comments.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "eviflow/flow.hpp"
#include "eviflow/functionals.hpp"
#include "eviflow/space.hpp"

namespace eviflow::cli {

struct CheckSpec {
  std::string name;
  double tolerance;
};

/// Names accepted in [checks].
const std::vector<std::string>& known_checks();

struct SpaceSpec {
  std::string kind = "interval";
  double lo = -1.0;
  double hi = 1.0;
  std::size_t points = 201;
  double radius = 1.0;
  std::filesystem::path file;
};

struct PotentialSpec {
  std::string formula = "quadratic";
  double scale = 1.0;
  double center = 0.0;
  std::filesystem::path file;
};

struct VerifySpec {
  std::size_t observation_points = 21;
  std::size_t pair_stride = 10;
  double nu = 0.0;  // coordinate of the observation Dirac
  double level = 0.05;
  std::optional<double> expected_hitting_time;
  std::optional<double> convexity_kappa;  // defaults to flow.kappa
  std::size_t convexity_budget = 200000;
  std::optional<double> slope_radius;
  double concentration_tol = 0.05;
};

struct SweepSpec {
  std::vector<double> n_list;
  std::vector<double> tau_list;
  std::vector<double> h_list;
  std::vector<std::string> assert_decreasing;     // strictly, column names
  std::vector<std::string> assert_nonincreasing;  // within relative slack
  double slack = 0.1;
};

struct Scenario {
  std::string name = "scenario";
  std::filesystem::path source_dir;
  SpaceSpec space;
  PotentialSpec potential;
  FlowParams flow;
  std::string functional = "potential";
  double n = 100.0;
  std::vector<double> n_list;
  std::vector<double> starts;
  std::vector<double> weights;
  std::vector<double> second_starts;
  std::vector<double> second_weights;
  VerifySpec verify;
  std::vector<CheckSpec> checks;
  std::filesystem::path output_dir = "out";
  bool write_trajectories = true;
  SweepSpec sweep;
};

/// Throws ParseError (with line numbers where known) on malformed input,
/// unknown sections, unknown keys, unknown check names and bad values.
Scenario parse_scenario(std::istream& in, const std::filesystem::path& source_dir = ".");
Scenario parse_scenario(const std::filesystem::path& path);

MetricMeasureSpace build_space(const Scenario& scenario);
/// Formula values are evaluated at point coordinates and frozen.
Potential build_potential(const Scenario& scenario, const MetricMeasureSpace& space);

}  // namespace eviflow::cli
