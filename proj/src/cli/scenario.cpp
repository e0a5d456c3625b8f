#include "eviflow/cli/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "eviflow/errors.hpp"

namespace eviflow::cli {

namespace pt = boost::property_tree;

const std::vector<std::string>& known_checks() {
  static const std::vector<std::string> names{
      "evi_differential", "evi_integral",        "evi_integral_flat",  "contraction",
      "contraction_measure", "dissipation",      "monotonicity",       "variance_decay",
      "dirac_preservation", "additivity",        "pushforward",        "level_hitting_time",
      "reparam_contraction", "convexity",        "regularization_monotone",
      "dirac_concentration"};
  return names;
}

namespace {

using KeyLines = std::map<std::string, std::size_t>;  // "section.key" -> line

// Drops inline comments outside quotes and records the line of every key, so
// that later validation errors can point at the offending line. The line
// structure is preserved for the INI reader.
std::string preprocess(std::istream& in, KeyLines& lines) {
  std::ostringstream out;
  std::string line, section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    bool quoted = false;
    std::size_t cut = line.size();
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (!quoted && (line[i] == '#' || line[i] == ';')) {
        cut = i;
        break;
      }
    }
    line.erase(cut);
    const auto first = line.find_first_not_of(" \t\r");
    if (first != std::string::npos) {
      if (line[first] == '[') {
        const auto close = line.find(']', first);
        if (close != std::string::npos) {
          section = line.substr(first + 1, close - first - 1);
          section.erase(0, section.find_first_not_of(" \t"));
          section.erase(section.find_last_not_of(" \t") + 1);
          lines.emplace("[" + section + "]", line_no);
        }
      } else if (const auto eq = line.find('='); eq != std::string::npos) {
        std::string key = line.substr(first, eq - first);
        key.erase(key.find_last_not_of(" \t") + 1);
        lines[section.empty() ? key : section + "." + key] = line_no;
      }
    }
    out << line << '\n';
  }
  return out.str();
}

class Reader {
 public:
  Reader(const pt::ptree& tree, const KeyLines& lines) : tree_(tree), lines_(lines) {}

  std::size_t line_of(const std::string& path) const {
    const auto it = lines_.find(path);
    return it == lines_.end() ? 0 : it->second;
  }

  // Section headers are recorded as "[name]".
  bool is_section(const std::string& name) const { return lines_.count("[" + name + "]") > 0; }

  [[noreturn]] void fail(const std::string& path, const std::string& what) const {
    throw ParseError(fmt::format("{}: {}", path, what), line_of(path));
  }

  std::optional<std::string> raw(const std::string& section, const std::string& key) const {
    const std::string path = section.empty() ? key : section + "." + key;
    const auto node = tree_.get_child_optional(pt::ptree::path_type(path, '.'));
    if (!node) return std::nullopt;
    std::string value = node->data();
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    return value;
  }

  std::string text(const std::string& section, const std::string& key, std::string fallback) const {
    return raw(section, key).value_or(std::move(fallback));
  }

  std::optional<double> real(const std::string& section, const std::string& key) const {
    const auto value = raw(section, key);
    if (!value) return std::nullopt;
    return parse_real(section + "." + key, *value);
  }

  double real(const std::string& section, const std::string& key, double fallback) const {
    return real(section, key).value_or(fallback);
  }

  std::size_t count(const std::string& section, const std::string& key, std::size_t fallback) const {
    const auto value = real(section, key);
    if (!value) return fallback;
    if (*value < 0.0 || *value != std::floor(*value)) {
      fail(section + "." + key, fmt::format("'{}' is not a nonnegative integer", *value));
    }
    return static_cast<std::size_t>(*value);
  }

  bool flag(const std::string& section, const std::string& key, bool fallback) const {
    const auto value = raw(section, key);
    if (!value) return fallback;
    if (*value == "true") return true;
    if (*value == "false") return false;
    fail(section + "." + key, fmt::format("'{}' is not true or false", *value));
  }

  std::vector<std::string> words(const std::string& section, const std::string& key) const {
    const auto value = raw(section, key);
    if (!value) return {};
    std::string body = *value;
    if (!body.empty() && body.front() == '[') {
      if (body.back() != ']') fail(section + "." + key, "unterminated list");
      body = body.substr(1, body.size() - 2);
    }
    std::vector<std::string> out;
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item.erase(0, item.find_first_not_of(" \t"));
      item.erase(item.find_last_not_of(" \t") + 1);
      if (item.size() >= 2 && item.front() == '"' && item.back() == '"') item = item.substr(1, item.size() - 2);
      if (item.empty()) fail(section + "." + key, "empty list entry");
      out.push_back(item);
    }
    return out;
  }

  std::vector<double> reals(const std::string& section, const std::string& key) const {
    std::vector<double> out;
    for (const auto& w : words(section, key)) out.push_back(parse_real(section + "." + key, w));
    return out;
  }

 private:
  double parse_real(const std::string& path, const std::string& value) const {
    std::size_t used = 0;
    double x = 0.0;
    try {
      x = std::stod(value, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != value.size() || !std::isfinite(x)) {
      fail(path, fmt::format("'{}' is not a finite number", value));
    }
    return x;
  }

  const pt::ptree& tree_;
  const KeyLines& lines_;
};

const std::map<std::string, std::set<std::string>>& allowed_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"", {"name"}},
      {"space", {"kind", "lo", "hi", "points", "radius", "file"}},
      {"potential", {"formula", "scale", "center", "file"}},
      {"flow",
       {"tau", "horizon", "kappa", "ricci_lower_bound", "solver_tolerance", "seed", "functional", "n",
        "n_list", "starts", "weights", "second_starts", "second_weights"}},
      {"verify",
       {"observation_points", "pair_stride", "nu", "level", "expected_hitting_time",
        "convexity_kappa", "convexity_budget", "slope_radius", "concentration_tol"}},
      {"checks", {}},
      {"output", {"dir", "trajectories"}},
      {"sweep", {"n_list", "tau_list", "h_list", "assert_decreasing", "assert_nonincreasing", "slack"}},
  };
  return keys;
}

void reject_unknown(const pt::ptree& tree, const Reader& reader) {
  const auto& allowed = allowed_keys();
  const auto& checks = known_checks();
  for (const auto& [name, node] : tree) {
    const bool is_section = reader.is_section(name);
    if (!is_section) {
      if (!allowed.at("").count(name)) reader.fail(name, "unknown key");
      continue;
    }
    const auto section = allowed.find(name);
    if (section == allowed.end() || name.empty()) {
      throw ParseError(fmt::format("unknown section [{}]", name), reader.line_of("[" + name + "]"));
    }
    for (const auto& [key, value] : node) {
      const std::string path = name + "." + key;
      if (name == "checks") {
        if (std::find(checks.begin(), checks.end(), key) == checks.end()) {
          reader.fail(path, "unknown check name");
        }
      } else if (!section->second.count(key)) {
        reader.fail(path, "unknown key");
      }
    }
  }
}

void require(bool ok, const Reader& reader, const std::string& path, const std::string& what) {
  if (!ok) reader.fail(path, what);
}

}  // namespace

Scenario parse_scenario(std::istream& in, const std::filesystem::path& source_dir) {
  KeyLines lines;
  std::istringstream cleaned(preprocess(in, lines));
  pt::ptree tree;
  try {
    pt::read_ini(cleaned, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError(e.message(), e.line());
  }
  const Reader r(tree, lines);
  reject_unknown(tree, r);

  Scenario s;
  s.source_dir = source_dir;
  s.name = r.text("", "name", s.name);

  if (!r.is_section("space")) throw ParseError("missing section [space]", 0);
  if (!r.is_section("potential")) throw ParseError("missing section [potential]", 0);
  if (!r.is_section("flow")) throw ParseError("missing section [flow]", 0);

  auto& sp = s.space;
  sp.kind = r.text("space", "kind", sp.kind);
  require(sp.kind == "interval" || sp.kind == "circle" || sp.kind == "graph", r, "space.kind",
          fmt::format("unknown space kind '{}'", sp.kind));
  sp.lo = r.real("space", "lo", sp.lo);
  sp.hi = r.real("space", "hi", sp.hi);
  sp.points = r.count("space", "points", sp.points);
  sp.radius = r.real("space", "radius", sp.radius);
  if (const auto f = r.raw("space", "file")) sp.file = source_dir / *f;
  if (sp.kind == "graph") {
    require(!sp.file.empty(), r, "space.file", "graph spaces need an edge-list file");
  } else {
    require(sp.points >= 2, r, "space.points", "at least two points are required");
  }
  if (sp.kind == "interval") require(sp.lo < sp.hi, r, "space.hi", "need lo < hi");
  if (sp.kind == "circle") require(sp.radius > 0.0, r, "space.radius", "radius must be positive");

  auto& pot = s.potential;
  pot.formula = r.text("potential", "formula", pot.formula);
  require(pot.formula == "quadratic" || pot.formula == "double_well" || pot.formula == "cosine" ||
              pot.formula == "file",
          r, "potential.formula", fmt::format("unknown formula '{}'", pot.formula));
  pot.scale = r.real("potential", "scale", pot.scale);
  pot.center = r.real("potential", "center", pot.center);
  if (const auto f = r.raw("potential", "file")) pot.file = source_dir / *f;
  if (pot.formula == "file") require(!pot.file.empty(), r, "potential.file", "missing file");

  auto& fl = s.flow;
  fl.tau = r.real("flow", "tau", fl.tau);
  fl.horizon = r.real("flow", "horizon", fl.horizon);
  fl.kappa = r.real("flow", "kappa", fl.kappa);
  fl.ricci_lower_bound = r.real("flow", "ricci_lower_bound", fl.ricci_lower_bound);
  fl.solver_tolerance = r.real("flow", "solver_tolerance", fl.solver_tolerance);
  fl.seed = r.count("flow", "seed", 0);
  try {
    fl.validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError(e.what(), r.line_of("flow.tau"));
  }
  s.functional = r.text("flow", "functional", s.functional);
  require(s.functional == "potential" || s.functional == "regularized", r, "flow.functional",
          fmt::format("unknown functional '{}'", s.functional));
  s.n = r.real("flow", "n", s.n);
  require(s.n > 0.0, r, "flow.n", "n must be positive");
  s.n_list = r.reals("flow", "n_list");
  for (double n : s.n_list) require(n > 0.0, r, "flow.n_list", "entries must be positive");
  s.starts = r.reals("flow", "starts");
  require(!s.starts.empty(), r, "flow.starts", "at least one start is required");
  s.weights = r.reals("flow", "weights");
  s.second_starts = r.reals("flow", "second_starts");
  s.second_weights = r.reals("flow", "second_weights");
  const auto check_weights = [&](const std::vector<double>& w, const std::vector<double>& at,
                                 const std::string& path) {
    if (w.empty()) return;
    require(w.size() == at.size(), r, path, "one weight per start is required");
    for (double x : w) require(x > 0.0, r, path, "weights must be positive");
  };
  check_weights(s.weights, s.starts, "flow.weights");
  check_weights(s.second_weights, s.second_starts, "flow.second_weights");

  auto& v = s.verify;
  v.observation_points = r.count("verify", "observation_points", v.observation_points);
  require(v.observation_points >= 1, r, "verify.observation_points", "must be at least 1");
  v.pair_stride = r.count("verify", "pair_stride", v.pair_stride);
  require(v.pair_stride >= 1, r, "verify.pair_stride", "must be at least 1");
  v.nu = r.real("verify", "nu", v.nu);
  v.level = r.real("verify", "level", v.level);
  v.expected_hitting_time = r.real("verify", "expected_hitting_time");
  v.convexity_kappa = r.real("verify", "convexity_kappa");
  v.convexity_budget = r.count("verify", "convexity_budget", v.convexity_budget);
  require(v.convexity_budget >= 1, r, "verify.convexity_budget", "must be at least 1");
  v.slope_radius = r.real("verify", "slope_radius");
  v.concentration_tol = r.real("verify", "concentration_tol", v.concentration_tol);

  if (const auto checks = tree.get_child_optional("checks")) {
    for (const auto& [name, node] : *checks) {
      const double tol = *r.real("checks", name);
      require(tol >= 0.0, r, "checks." + name, "tolerance must be nonnegative");
      s.checks.push_back({name, tol});
    }
  }
  for (const auto& c : s.checks) {
    if (c.name == "level_hitting_time") {
      require(v.expected_hitting_time.has_value(), r, "checks.level_hitting_time",
              "needs verify.expected_hitting_time");
    }
    if (c.name == "contraction" || c.name == "reparam_contraction") {
      require(s.starts.size() >= 2, r, "checks." + c.name, "needs two starts");
    }
    if (c.name == "contraction_measure") {
      require(!s.second_starts.empty(), r, "checks." + c.name, "needs flow.second_starts");
    }
    if (c.name == "regularization_monotone" || c.name == "dirac_concentration") {
      require(!s.n_list.empty(), r, "checks." + c.name, "needs flow.n_list");
    }
  }

  if (const auto dir = r.raw("output", "dir")) s.output_dir = *dir;
  s.write_trajectories = r.flag("output", "trajectories", s.write_trajectories);

  auto& sw = s.sweep;
  sw.n_list = r.reals("sweep", "n_list");
  sw.tau_list = r.reals("sweep", "tau_list");
  sw.h_list = r.reals("sweep", "h_list");
  for (double x : sw.n_list) require(x > 0.0, r, "sweep.n_list", "entries must be positive");
  for (double x : sw.tau_list) require(x > 0.0, r, "sweep.tau_list", "entries must be positive");
  for (double x : sw.h_list) require(x > 0.0, r, "sweep.h_list", "entries must be positive");
  sw.assert_decreasing = r.words("sweep", "assert_decreasing");
  sw.assert_nonincreasing = r.words("sweep", "assert_nonincreasing");
  sw.slack = r.real("sweep", "slack", sw.slack);
  require(sw.slack >= 0.0, r, "sweep.slack", "slack must be nonnegative");
  return s;
}

Scenario parse_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open scenario " + path.string());
  try {
    return parse_scenario(in, path.parent_path().empty() ? "." : path.parent_path());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), 0);
  }
}

MetricMeasureSpace build_space(const Scenario& scenario) {
  const auto& sp = scenario.space;
  if (sp.kind == "interval") return MetricMeasureSpace::interval(sp.lo, sp.hi, sp.points);
  if (sp.kind == "circle") return MetricMeasureSpace::circle(sp.points, sp.radius);
  return load_graph_space(sp.file);
}

Potential build_potential(const Scenario& scenario, const MetricMeasureSpace& space) {
  const auto& p = scenario.potential;
  if (p.formula == "file") return read_potential_csv(p.file, space.size());
  const double scale = p.scale, c = p.center;
  if (p.formula == "quadratic") {
    return Potential::from_formula(space, [=](double x) { return 0.5 * scale * (x - c) * (x - c); });
  }
  if (p.formula == "double_well") {
    return Potential::from_formula(space, [=](double x) {
      const double u = (x - c) * (x - c) - 1.0;
      return scale * u * u;
    });
  }
  // cosine: angle is arc length over radius on a circle, the coordinate elsewhere.
  const double radius = space.kind() == SpaceKind::Circle ? scenario.space.radius : 1.0;
  return Potential::from_formula(space, [=](double x) { return -scale * std::cos(x / radius - c); });
}

}  // namespace eviflow::cli
