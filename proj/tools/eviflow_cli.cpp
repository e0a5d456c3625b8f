// eviflow: run gradient-flow scenarios and their verification suites.
//
//   eviflow space validate <edge-list>
//   eviflow flow run <scenario>
//   eviflow sweep run <scenario> --axis n_list|tau_list|h_list
//   eviflow verify suite <scenario>
//
// Exit status: 0 when every check passes, 1 when a check or assertion fails,
// 2 on bad input or a solver error. EVIFLOW_OUT sets the default for --out.

#include <cstdint>
#include <cstdlib>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "eviflow/cli/runner.hpp"
#include "eviflow/cli/scenario.hpp"
#include "eviflow/io.hpp"
#include "eviflow/space.hpp"

namespace {

int validate_space(const std::string& file, std::uint64_t seed, bool quiet) {
  const auto space = eviflow::load_graph_space(file);
  const auto report = eviflow::validate_metric(space, seed);
  if (!quiet) {
    std::cout << fmt::format("points {}  diameter {}  {} {}\n", space.size(),
                             eviflow::format_real(space.diameter()),
                             report.sampled ? "sampled triples" : "triples", report.triples_checked);
    if (report.pass) {
      std::cout << "metric OK\n";
    } else {
      std::cout << fmt::format("metric FAIL: {} violation {} at ({}, {}, {})\n",
                               eviflow::to_string(report.kind),
                               eviflow::format_real(report.worst_violation), report.witness[0],
                               report.witness[1], report.witness[2]);
    }
  }
  return report.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discrete EVI gradient flows on metric measure spaces"};
  app.require_subcommand(1);
  app.fallthrough();

  eviflow::cli::RunOptions options;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  app.add_option("--out", out_dir, "Output root; files go to <out>/<scenario name>")
      ->envname("EVIFLOW_OUT");
  app.add_option("--seed", seed, "Override the scenario seed");
  app.add_flag("--quiet", options.quiet, "Only the exit status reports the outcome");

  auto* space_cmd = app.add_subcommand("space", "Metric spaces");
  space_cmd->require_subcommand(1);
  std::string edge_file;
  auto* validate_cmd = space_cmd->add_subcommand("validate", "Check an edge list yields a metric");
  validate_cmd->add_option("file", edge_file, "Edge-list file")->required()->check(CLI::ExistingFile);

  auto* flow_cmd = app.add_subcommand("flow", "Trajectories");
  flow_cmd->require_subcommand(1);
  std::string config;
  auto* flow_run = flow_cmd->add_subcommand("run", "Write the scenario's trajectories");
  flow_run->add_option("config", config, "Scenario file")->required()->check(CLI::ExistingFile);

  auto* sweep_cmd = app.add_subcommand("sweep", "Parameter sweeps");
  sweep_cmd->require_subcommand(1);
  std::string axis;
  auto* sweep_run = sweep_cmd->add_subcommand("run", "Rerun the checks along one axis");
  sweep_run->add_option("config", config, "Scenario file")->required()->check(CLI::ExistingFile);
  sweep_run->add_option("--axis", axis, "n_list, tau_list or h_list")
      ->required()
      ->check(CLI::IsMember({"n_list", "tau_list", "h_list"}));

  auto* verify_cmd = app.add_subcommand("verify", "Verification suites");
  verify_cmd->require_subcommand(1);
  auto* verify_suite = verify_cmd->add_subcommand("suite", "Run every configured check");
  verify_suite->add_option("config", config, "Scenario file")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  if (!out_dir.empty()) options.out_root = out_dir;
  options.seed = seed;

  try {
    if (*validate_cmd) return validate_space(edge_file, seed.value_or(0), options.quiet);

    auto scenario = eviflow::cli::parse_scenario(config);
    if (*flow_run) {
      scenario.checks.clear();
      scenario.write_trajectories = true;
      const auto result = eviflow::cli::run_scenario(scenario, options);
      if (!options.quiet) std::cout << "wrote " << result.output_dir.string() << '\n';
      return 0;
    }
    if (*sweep_run) {
      const auto result = eviflow::cli::run_sweep(scenario, axis, options);
      return result.pass() ? 0 : 1;
    }
    const auto result = eviflow::cli::run_scenario(scenario, options);
    if (!options.quiet) {
      std::cout << fmt::format("{}: {}\n", scenario.name, result.pass() ? "all checks pass" : "FAILED");
    }
    return result.pass() ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "eviflow: " << e.what() << '\n';
    return 2;
  }
}
