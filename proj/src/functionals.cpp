#include "eviflow/functionals.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "eviflow/errors.hpp"

namespace eviflow {

Potential::Potential(std::vector<double> values) : values_(std::move(values)) {
  for (PointIndex i = 0; i < values_.size(); ++i) {
    const double v = values_[i];
    if (std::isnan(v) || v == -kInfinity) {
      throw std::invalid_argument(fmt::format("potential value {} at point {} is not in (-inf, +inf]", v, i));
    }
    if (v < kInfinity) finite_set_.push_back(i);
  }
  if (finite_set_.empty()) throw std::invalid_argument("potential is +inf everywhere (empty X0)");
}

Potential::Potential(const MetricMeasureSpace& space, std::vector<double> values, LowerBound bound)
    : Potential(std::move(values)) {
  if (values_.size() != space.size()) throw std::invalid_argument("potential does not match the space");
  if (bound.anchor >= space.size()) throw std::invalid_argument("lower-bound anchor outside the space");
  for (PointIndex i = 0; i < values_.size(); ++i) {
    const double floor = -bound.c0 - bound.c1 * space.squared_distance(i, bound.anchor);
    if (values_[i] < floor) {
      throw std::invalid_argument(
          fmt::format("V({}) = {} is below the lower bound {}", i, values_[i], floor));
    }
  }
  bound_ = bound;
}

Potential Potential::from_formula(const MetricMeasureSpace& space,
                                  const std::function<double(double)>& f) {
  std::vector<double> values(space.size());
  for (PointIndex i = 0; i < space.size(); ++i) values[i] = f(space.coord(i));
  return Potential(std::move(values));
}

Potential read_potential_csv(std::istream& in, std::size_t n) {
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  std::vector<double> values(n, 0.0);
  std::vector<bool> seen(n, false);
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (!header) {
      if (line != "point_index,value") throw ParseError("expected header 'point_index,value'", line_no);
      header = true;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ParseError("expected 'point_index,value'", line_no);
    std::size_t index;
    std::string value = line.substr(comma + 1);
    value.erase(0, value.find_first_not_of(" \t"));
    value.erase(value.find_last_not_of(" \t") + 1);
    try {
      std::size_t used = 0;
      const long long parsed = std::stoll(line.substr(0, comma), &used);
      if (parsed < 0) throw std::invalid_argument("negative");
      index = static_cast<std::size_t>(parsed);
    } catch (const std::exception&) {
      throw ParseError("bad point index '" + line.substr(0, comma) + "'", line_no);
    }
    if (index >= n) throw ParseError(fmt::format("point index {} outside 0..{}", index, n - 1), line_no);
    if (seen[index]) throw ParseError(fmt::format("point {} listed twice", index), line_no);
    if (value == "inf") {
      values[index] = kInfinity;
    } else {
      std::size_t used = 0;
      try {
        values[index] = std::stod(value, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != value.size() || value.empty() || !std::isfinite(values[index])) {
        throw ParseError("bad potential value '" + value + "'", line_no);
      }
    }
    seen[index] = true;
  }
  if (!header) throw ParseError("empty potential file", 0);
  const auto missing = std::find(seen.begin(), seen.end(), false);
  if (missing != seen.end()) {
    throw ParseError(fmt::format("no value for point {}", missing - seen.begin()), line_no);
  }
  return Potential(std::move(values));
}

Potential read_potential_csv(const std::filesystem::path& path, std::size_t n) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open potential file " + path.string());
  return read_potential_csv(in, n);
}

double relative_entropy(std::span<const double> reference, const ProbabilityMeasure& mu) {
  if (reference.size() != mu.size()) throw std::invalid_argument("reference does not match the measure");
  double sum = 0.0;
  for (PointIndex i = 0; i < mu.size(); ++i) {
    const double p = mu[i];
    if (p == 0.0) continue;
    if (!(reference[i] > 0.0)) return kInfinity;
    sum += p * std::log(p / reference[i]);
  }
  return sum;
}

double entropy(const MetricMeasureSpace& space, const ProbabilityMeasure& mu) {
  return relative_entropy(space.measure(), mu);
}

double potential_energy(const Potential& v, const ProbabilityMeasure& mu) {
  if (v.size() != mu.size()) throw std::invalid_argument("potential does not match the measure");
  double sum = 0.0;
  for (PointIndex i = 0; i < mu.size(); ++i) {
    if (mu[i] == 0.0) continue;
    if (!v.finite(i)) return kInfinity;
    sum += v(i) * mu[i];
  }
  return sum;
}

double regularized_energy(const MetricMeasureSpace& space, const Potential& v,
                          const ProbabilityMeasure& mu, double n) {
  if (!(n > 0.0)) throw std::invalid_argument("regularization index n must be positive");
  const double s = potential_energy(v, mu);
  if (s == kInfinity) return kInfinity;
  return entropy(space, mu) / n + s;
}

double tilted_entropy(const MetricMeasureSpace& space, const Potential& v,
                      const ProbabilityMeasure& mu, double n) {
  if (!(n > 0.0)) throw std::invalid_argument("regularization index n must be positive");
  std::vector<double> tilted(space.size());
  for (PointIndex i = 0; i < space.size(); ++i) {
    tilted[i] = v.finite(i) ? std::exp(-n * v(i)) * space.measure(i) : 0.0;
  }
  return relative_entropy(tilted, mu) / n;
}

bool ConvexityReport::pass() const noexcept {
  // Absolute allowance for rounding in the three-term comparison.
  return worst_violation <= quantization_slack + 1e-12;
}

std::span<const double> convexity_t_grid() noexcept {
  static constexpr std::array<double, 9> grid{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  return grid;
}

double local_lipschitz_estimate(const MetricMeasureSpace& space, const Potential& v) {
  const double radius = 2.0 * space.resolution();
  double lip = 0.0;
  const auto offer = [&](PointIndex i, PointIndex j) {
    if (i == j || !v.finite(i) || !v.finite(j)) return;
    const double d = space.distance(i, j);
    if (d > 0.0 && d <= radius * (1.0 + 1e-12)) lip = std::max(lip, std::abs(v(i) - v(j)) / d);
  };
  const std::size_t n = space.size();
  if (space.kind() == SpaceKind::Graph) {
    for (PointIndex i = 0; i < n; ++i)
      for (PointIndex j = i + 1; j < n; ++j) offer(i, j);
  } else {
    // One-step slopes, each pushed to the edge of its cell by half the change
    // to the neighbouring slope; a plain difference quotient underestimates
    // sup |V'| by about h |V''| / 2.
    const bool wraps = space.kind() == SpaceKind::Circle;
    const std::size_t cells = wraps ? n : n - 1;
    std::vector<double> slope(cells, std::numeric_limits<double>::quiet_NaN());
    for (PointIndex i = 0; i < cells; ++i) {
      const PointIndex j = (i + 1) % n;
      if (v.finite(i) && v.finite(j)) slope[i] = (v(j) - v(i)) / space.distance(i, j);
    }
    for (PointIndex i = 0; i < cells; ++i) {
      if (std::isnan(slope[i])) continue;
      double change = 0.0;
      const auto compare = [&](std::size_t k) {
        if (!std::isnan(slope[k])) change = std::max(change, std::abs(slope[k] - slope[i]));
      };
      if (wraps || i > 0) compare((i + cells - 1) % cells);
      if (wraps || i + 1 < cells) compare((i + 1) % cells);
      lip = std::max(lip, std::abs(slope[i]) + change / 2.0);
    }
    const std::size_t reach = space.offsets_within(radius);
    for (PointIndex i = 0; i < n; ++i) {
      for (std::size_t o = 1; o <= reach; ++o) {
        if (space.kind() == SpaceKind::Interval) {
          if (i + o < n) offer(i, i + o);
        } else {
          offer(i, (i + o) % n);
        }
      }
    }
  }
  return lip;
}

ConvexityReport kappa_convexity_report(const MetricMeasureSpace& space, const Potential& v,
                                       double kappa, std::size_t sample_budget, std::uint64_t seed,
                                       std::optional<double> slack) {
  if (sample_budget < 1) throw std::invalid_argument("sample budget must be at least 1");
  if (v.size() != space.size()) throw std::invalid_argument("potential does not match the space");
  const auto domain = v.finite_set();
  if (domain.empty()) throw std::invalid_argument("empty X0");

  ConvexityReport report;
  report.kappa = kappa;
  const auto grid = convexity_t_grid();

  const auto check_pair = [&](PointIndex x, PointIndex y) {
    const double d2 = space.squared_distance(x, y);
    for (double t : grid) {
      const GeodesicSample sample = intermediate_point(space, x, y, t);
      const double chord = (1.0 - t) * v(x) + t * v(y) - kappa * t * (1.0 - t) * d2 / 2.0;
      const double violation = v.finite(sample.midpoint) ? v(sample.midpoint) - chord : kInfinity;
      if (violation > report.worst_violation) {
        report.worst_violation = violation;
        report.witness = {x, y, t, sample.midpoint};
      }
      report.max_defect = std::max(report.max_defect, sample.defect);
      ++report.samples_checked;
    }
  };

  const std::size_t m = domain.size();
  if (m * m <= sample_budget) {
    for (PointIndex a = 0; a < m; ++a)
      for (PointIndex b = 0; b < m; ++b)
        if (a != b) check_pair(domain[a], domain[b]);
  } else {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, m - 1);
    for (std::size_t s = 0; s < sample_budget; ++s) {
      const std::size_t a = pick(rng), b = pick(rng);
      if (a != b) check_pair(domain[a], domain[b]);
    }
  }
  if (report.samples_checked == 0) report.worst_violation = 0.0;

  report.lipschitz_estimate = local_lipschitz_estimate(space, v);
  report.quantization_slack = slack.value_or(report.lipschitz_estimate * report.max_defect);
  return report;
}

}  // namespace eviflow
