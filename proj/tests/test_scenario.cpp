#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include "eviflow/cli/runner.hpp"
#include "eviflow/cli/scenario.hpp"
#include "eviflow/errors.hpp"

using namespace eviflow;
using namespace eviflow::cli;
namespace fs = std::filesystem;

namespace {

const char* kMinimal = R"(name = small
[space]
kind = interval
lo = -1.0
hi = 1.0
points = 201

[potential]
formula = quadratic

[flow]
tau = 0.05
horizon = 0.5
kappa = 1.0
starts = [0.5, -0.25]
)";

Scenario parse(const std::string& text) {
  std::istringstream in(text);
  return parse_scenario(in);
}

std::size_t error_line(const std::string& text, std::string* message = nullptr) {
  try {
    parse(text);
  } catch (const ParseError& e) {
    if (message) *message = e.what();
    return e.line();
  }
  FAIL("expected a parse error");
  return 0;
}

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("eviflow_test_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

RunOptions options_in(const fs::path& root) {
  RunOptions o;
  o.out_root = root;
  o.quiet = true;
  return o;
}

}  // namespace

TEST_CASE("minimal scenario") {
  const auto s = parse(kMinimal);
  CHECK(s.name == "small");
  CHECK(s.checks.empty());
  CHECK(s.space.points == 201);
  CHECK(s.flow.tau == 0.05);
  CHECK(s.starts == std::vector<double>{0.5, -0.25});
  CHECK(s.functional == "potential");
  CHECK(build_space(s).size() == 201);
  const auto space = build_space(s);
  CHECK(build_potential(s, space)(200) == doctest::Approx(0.5));
}

TEST_CASE("checks carry their tolerances in file order") {
  const auto s = parse(std::string(kMinimal) + "[checks]\nmonotonicity = 0\nevi_differential = 0.05  # loose\n");
  REQUIRE(s.checks.size() == 2);
  CHECK(s.checks[0].name == "monotonicity");
  CHECK(s.checks[1].name == "evi_differential");
  CHECK(s.checks[1].tolerance == 0.05);
}

TEST_CASE("scenario errors") {
  std::string message;
  CHECK(error_line(std::string(kMinimal) + "taus = [0.1]\n", &message) == 16);
  CHECK(message.find("taus") != std::string::npos);
  CHECK(error_line(std::string(kMinimal) + "[checks]\nevi_sideways = 0.1\n", &message) == 17);
  CHECK(message.find("evi_sideways") != std::string::npos);
  CHECK(error_line(std::string(kMinimal) + "[checks]\nevi_differential = -1\n") == 17);
  CHECK(error_line(std::string(kMinimal) + "[plots]\nwidth = 3\n", &message) > 0);
  CHECK(message.find("plots") != std::string::npos);
  CHECK_THROWS_AS(parse("[space]\nkind = interval\n[potential]\nformula = quadratic\n"), ParseError);
  CHECK(error_line(std::string(kMinimal) + "seed = banana\n") == 16);
  CHECK(error_line("name = x\n[space]\nkind = torus\n[potential]\n[flow]\nstarts = [0]\n") == 3);
  CHECK_THROWS_AS(parse_scenario(fs::path("/nonexistent/scenario.toml")), std::exception);
}

TEST_CASE("shipped scenarios parse") {
  for (const auto& entry : fs::directory_iterator(fs::path(EVIFLOW_SOURCE_DIR) / "scenarios")) {
    if (entry.path().extension() != ".toml") continue;
    CAPTURE(entry.path().string());
    const auto s = parse_scenario(entry.path());
    CHECK_FALSE(s.checks.empty());
    CHECK_NOTHROW(build_potential(s, build_space(s)));
  }
}

TEST_CASE("a zero tolerance on a discretized check fails") {
  auto s = parse(std::string(kMinimal) + "[checks]\nevi_differential = 0\nmonotonicity = 0\n");
  const auto dir = scratch_dir("zero_tol");
  const auto result = run_scenario(s, options_in(dir));
  CHECK_FALSE(result.pass());
  CHECK_FALSE(result.checks[0].pass);
  CHECK(result.checks[0].residual > 0.0);
  CHECK(result.checks[1].pass);
  CHECK(fs::exists(dir / "small" / "report.json"));
  fs::remove_all(dir);
}

TEST_CASE("Dirac preservation is exact") {
  auto s = parse(std::string(kMinimal) + "[checks]\ndirac_preservation = 0\npushforward = 0\nadditivity = 0\n");
  s.weights = {0.3, 0.7};
  const auto result = evaluate_checks(s);
  CHECK(result.pass());
  for (const auto& c : result.checks) CHECK(c.residual == 0.0);
}

TEST_CASE("re-runs produce byte-identical files") {
  const auto s = parse(std::string(kMinimal) +
                       "weights = [0.5, 0.5]\n[checks]\nevi_differential = 0.2\ncontraction = 0.1\n"
                       "variance_decay = 0.1\ndissipation = 0.2\n");
  const auto a = scratch_dir("rerun_a"), b = scratch_dir("rerun_b");
  run_scenario(s, options_in(a));
  run_scenario(s, options_in(b));
  std::size_t files = 0;
  for (const auto& entry : fs::directory_iterator(a / "small")) {
    ++files;
    CAPTURE(entry.path().filename().string());
    CHECK(slurp(entry.path()) == slurp(b / "small" / entry.path().filename()));
  }
  CHECK(files >= 4);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("report files") {
  const auto s = parse(std::string(kMinimal) + "[checks]\nmonotonicity = 0\n");
  const auto result = evaluate_checks(s);
  std::ostringstream json, csv;
  write_report_json(json, result);
  write_suite_csv(csv, result);
  const auto parsed = nlohmann::json::parse(json.str());
  REQUIRE(parsed.is_array());
  CHECK(parsed[0]["check"] == "monotonicity");
  CHECK(parsed[0]["pass"] == true);
  CHECK(parsed[0].contains("max_residual"));
  CHECK(parsed[0].contains("witness"));
  CHECK(csv.str().rfind("check,", 0) == 0);
}

TEST_CASE("singleton sweep matches the plain run") {
  auto s = parse(std::string(kMinimal) + "[checks]\nevi_differential = 0.2\ncontraction = 0.1\n");
  s.sweep.tau_list = {s.flow.tau};
  const auto dir = scratch_dir("singleton");
  const auto sweep = run_sweep(s, "tau_list", options_in(dir));
  const auto plain = evaluate_checks(s);
  REQUIRE(sweep.rows.size() == 1);
  REQUIRE(sweep.rows[0].residuals.size() == plain.checks.size());
  for (std::size_t i = 0; i < plain.checks.size(); ++i) CHECK(sweep.rows[0].residuals[i] == plain.checks[i].residual);
  CHECK(sweep.rows[0].checks_pass == plain.pass());
  CHECK_THROWS_AS(run_sweep(s, "h_list", options_in(dir)), std::invalid_argument);
  fs::remove_all(dir);
}

TEST_CASE("sweep assertions") {
  auto s = parse(std::string(kMinimal) + "[checks]\nevi_differential = 0.5\n");
  s.sweep.tau_list = {0.1, 0.05, 0.025};
  s.sweep.assert_decreasing = {"evi_differential"};
  const auto dir = scratch_dir("sweep_assert");
  const auto forward = run_sweep(s, "tau_list", options_in(dir));
  REQUIRE(forward.rows.size() == 3);
  CHECK(fs::exists(dir / "small" / "sweep_tau_list.csv"));
  bool decreasing = true;
  for (std::size_t i = 0; i + 1 < 3; ++i)
    decreasing = decreasing && forward.rows[i + 1].residuals[0] < forward.rows[i].residuals[0];
  CHECK(forward.pass() == decreasing);

  // The same values in the opposite order cannot also be strictly decreasing.
  s.sweep.tau_list = {0.025, 0.05, 0.1};
  const auto backward = run_sweep(s, "tau_list", options_in(dir));
  CHECK_FALSE((forward.pass() && backward.pass()));

  s.sweep.assert_decreasing = {"no_such_column"};
  CHECK_THROWS(run_sweep(s, "tau_list", options_in(dir)));
  fs::remove_all(dir);
}
