#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "eviflow/cli/scenario.hpp"

namespace eviflow::cli {

struct CheckResult {
  std::string name;
  double residual = 0.0;
  double tolerance = 0.0;
  bool pass = false;            // residual <= tolerance
  double runtime_seconds = 0.0;  // console only; never written to files
  nlohmann::ordered_json witness = nlohmann::ordered_json::object();
  nlohmann::ordered_json params = nlohmann::ordered_json::object();
};

struct SuiteResult {
  std::string scenario;
  std::vector<CheckResult> checks;
  std::filesystem::path output_dir;

  bool pass() const noexcept;
};

struct RunOptions {
  std::optional<std::filesystem::path> out_root;  // overrides [output] dir
  std::optional<std::uint64_t> seed;              // overrides [flow] seed
  bool quiet = false;
  bool write_outputs = true;
};

/// Directory that receives the scenario's files.
std::filesystem::path output_directory(const Scenario& scenario, const RunOptions& options);

/// Runs the configured checks in file order. Writes trajectory CSVs (unless
/// disabled), report.json and suite.csv. A check that throws is rethrown as
/// std::runtime_error prefixed with the check name.
SuiteResult run_scenario(const Scenario& scenario, const RunOptions& options);

/// Only the checks, no files.
SuiteResult evaluate_checks(const Scenario& scenario, std::ostream* log = nullptr);

struct SweepRow {
  double value;
  double final_variance;
  double final_energy;
  std::vector<double> residuals;  // one per configured check
  bool checks_pass;
};

struct SweepResult {
  std::string axis;
  std::vector<std::string> check_names;
  std::vector<SweepRow> rows;
  std::vector<std::string> failed_assertions;

  bool pass() const noexcept { return failed_assertions.empty(); }
};

/// Axis names: n_list, tau_list, h_list. Each value rewrites the scenario
/// (regularized functional with that n, step size, or grid spacing), reruns
/// the checks, and adds a row. Writes sweep_<axis>.csv and applies the
/// [sweep] monotonicity assertions.
SweepResult run_sweep(const Scenario& scenario, const std::string& axis, const RunOptions& options);

void write_report_json(std::ostream& out, const SuiteResult& result);
void write_suite_csv(std::ostream& out, const SuiteResult& result);
void write_sweep_csv(std::ostream& out, const SweepResult& result);

}  // namespace eviflow::cli
