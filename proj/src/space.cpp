#include "eviflow/space.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "eviflow/errors.hpp"
#include "eviflow/kernels.hpp"

namespace eviflow {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<double> checked_measure(std::size_t n, std::optional<std::vector<double>> measure) {
  if (!measure) return std::vector<double>(n, 1.0);
  if (measure->size() != n) {
    throw std::invalid_argument(
        fmt::format("measure has {} weights for {} points", measure->size(), n));
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double w = (*measure)[i];
    if (!(w > 0.0) || !std::isfinite(w)) {
      throw std::invalid_argument(fmt::format("measure weight {} at point {} is not positive", w, i));
    }
  }
  return std::move(*measure);
}

// Smallest positive and largest finite off-diagonal entries.
std::pair<double, double> matrix_extent(std::span<const double> m, std::size_t n) {
  double smallest = kInf;
  double largest = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double d = m[i * n + j];
      if (i == j || !std::isfinite(d)) continue;
      if (d > 0.0) smallest = std::min(smallest, d);
      largest = std::max(largest, d);
    }
  }
  return {std::isfinite(smallest) ? smallest : 0.0, largest};
}

}  // namespace

MetricMeasureSpace MetricMeasureSpace::interval(double a, double b, std::size_t n) {
  if (n < 2) throw std::invalid_argument("interval space needs at least 2 points");
  if (!(a < b) || !std::isfinite(a) || !std::isfinite(b)) {
    throw std::invalid_argument(fmt::format("interval [{}, {}] is empty or unbounded", a, b));
  }
  MetricMeasureSpace s;
  s.kind_ = SpaceKind::Interval;
  s.n_ = n;
  s.origin_ = a;
  s.span_ = b - a;
  s.spacing_ = (b - a) / static_cast<double>(n - 1);
  s.diameter_ = static_cast<double>(n - 1) * s.spacing_;
  s.measure_.assign(n, s.spacing_);
  return s;
}

MetricMeasureSpace MetricMeasureSpace::circle(std::size_t n, double radius) {
  if (n < 2) throw std::invalid_argument("circle space needs at least 2 points");
  if (!(radius > 0.0) || !std::isfinite(radius)) {
    throw std::invalid_argument(fmt::format("circle radius {} is not positive", radius));
  }
  MetricMeasureSpace s;
  s.kind_ = SpaceKind::Circle;
  s.n_ = n;
  s.span_ = 2.0 * std::numbers::pi * radius;
  s.spacing_ = s.span_ / static_cast<double>(n);
  s.diameter_ = static_cast<double>(n / 2) * s.spacing_;
  s.measure_.assign(n, s.spacing_);
  return s;
}

MetricMeasureSpace MetricMeasureSpace::graph(std::size_t n, std::span<const Edge> edges,
                                             std::optional<std::vector<double>> measure) {
  if (n == 0) throw std::invalid_argument("graph space needs at least 1 point");
  std::vector<double> m(n * n, kInf);
  for (std::size_t i = 0; i < n; ++i) m[i * n + i] = 0.0;
  for (const Edge& e : edges) {
    if (e.from >= n || e.to >= n) {
      throw std::invalid_argument(
          fmt::format("edge ({}, {}) references a point outside 0..{}", e.from, e.to, n - 1));
    }
    if (!(e.weight > 0.0) || !std::isfinite(e.weight)) {
      throw std::invalid_argument(
          fmt::format("edge ({}, {}) has nonpositive weight {}", e.from, e.to, e.weight));
    }
    if (e.from == e.to) continue;
    double& forward = m[e.from * n + e.to];
    forward = std::min(forward, e.weight);
    m[e.to * n + e.from] = forward;
  }
  kernels::omp::shortest_paths(m, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (!std::isfinite(m[i * n + j])) {
        throw DisconnectedGraphError(
            fmt::format("graph is disconnected: no path between {} and {}", i, j));
      }
    }
  }
  MetricMeasureSpace s;
  s.kind_ = SpaceKind::Graph;
  s.n_ = n;
  s.measure_ = checked_measure(n, std::move(measure));
  std::tie(s.spacing_, s.diameter_) = matrix_extent(m, n);
  s.matrix_ = std::move(m);
  return s;
}

MetricMeasureSpace MetricMeasureSpace::from_matrix(std::size_t n, std::vector<double> distances,
                                                   std::optional<std::vector<double>> measure) {
  if (n == 0) throw std::invalid_argument("space needs at least 1 point");
  if (distances.size() != n * n) {
    throw std::invalid_argument(
        fmt::format("distance matrix has {} entries, expected {}", distances.size(), n * n));
  }
  MetricMeasureSpace s;
  s.kind_ = SpaceKind::Graph;
  s.n_ = n;
  s.measure_ = checked_measure(n, std::move(measure));
  std::tie(s.spacing_, s.diameter_) = matrix_extent(distances, n);
  s.matrix_ = std::move(distances);
  return s;
}

double MetricMeasureSpace::total_measure() const noexcept {
  double total = 0.0;
  for (double w : measure_) total += w;
  return total;
}

double MetricMeasureSpace::coord(PointIndex i) const noexcept {
  switch (kind_) {
    case SpaceKind::Interval:
      return origin_ + span_ * (static_cast<double>(i) / static_cast<double>(n_ - 1));
    case SpaceKind::Circle:
      return static_cast<double>(i) * spacing_;
    case SpaceKind::Graph:
      break;
  }
  return static_cast<double>(i);
}

PointIndex MetricMeasureSpace::nearest_point(double c) const {
  if (!std::isfinite(c)) throw std::invalid_argument("coordinate is not finite");
  switch (kind_) {
    case SpaceKind::Interval: {
      const double guess = std::round((c - origin_) / spacing_);
      const auto centre = static_cast<PointIndex>(std::clamp(guess, 0.0, double(n_ - 1)));
      PointIndex best = centre;
      const PointIndex lo = centre > 0 ? centre - 1 : 0;
      const PointIndex hi = std::min(centre + 1, n_ - 1);
      for (PointIndex i = lo; i <= hi; ++i) {
        if (std::abs(coord(i) - c) < std::abs(coord(best) - c) ||
            (std::abs(coord(i) - c) == std::abs(coord(best) - c) && i < best)) {
          best = i;
        }
      }
      return best;
    }
    case SpaceKind::Circle: {
      double wrapped = std::fmod(c, span_);
      if (wrapped < 0.0) wrapped += span_;
      return static_cast<PointIndex>(std::round(wrapped / spacing_)) % n_;
    }
    case SpaceKind::Graph:
      break;
  }
  return static_cast<PointIndex>(std::clamp(std::round(c), 0.0, double(n_ - 1)));
}

std::size_t MetricMeasureSpace::offsets_within(double r) const noexcept {
  if (!(spacing_ > 0.0)) return 0;
  return static_cast<std::size_t>(std::floor(r / spacing_ * (1.0 + 1e-12)));
}

double intermediate_defect(const MetricMeasureSpace& space, PointIndex x, PointIndex y,
                           double t, PointIndex z) noexcept {
  const double d = space.distance(x, y);
  return std::max(std::abs(space.distance(x, z) - t * d),
                  std::abs(space.distance(z, y) - (1.0 - t) * d));
}

GeodesicSample intermediate_point(const MetricMeasureSpace& space, PointIndex x, PointIndex y,
                                  double t) {
  if (x >= space.size() || y >= space.size()) {
    throw std::invalid_argument(fmt::format("points ({}, {}) out of range", x, y));
  }
  if (!(t >= 0.0 && t <= 1.0)) {
    throw std::invalid_argument(fmt::format("geodesic parameter {} outside [0, 1]", t));
  }
  kernels::Argmin best;
  if (space.kind() == SpaceKind::Interval) {
    // On a grid line the optimum sits next to the fractional index x + t (y - x).
    const double target = static_cast<double>(x) + t * (static_cast<double>(y) - static_cast<double>(x));
    const double lo = std::max(0.0, std::floor(target) - 1.0);
    const double hi = std::min(double(space.size() - 1), std::ceil(target) + 1.0);
    for (auto z = static_cast<PointIndex>(lo); z <= static_cast<PointIndex>(hi); ++z) {
      const kernels::Argmin candidate{intermediate_defect(space, x, y, t, z), z};
      if (candidate < best) best = candidate;
    }
  } else if (space.kind() == SpaceKind::Circle) {
    // Same idea along the shorter arc; both arcs when y is antipodal to x.
    const auto n = static_cast<std::ptrdiff_t>(space.size());
    std::ptrdiff_t offset = (static_cast<std::ptrdiff_t>(y) - static_cast<std::ptrdiff_t>(x) + n) % n;
    std::vector<std::ptrdiff_t> arcs{offset <= n / 2 ? offset : offset - n};
    if (2 * offset == n) arcs.push_back(-offset);
    for (const std::ptrdiff_t arc : arcs) {
      const double target = static_cast<double>(x) + t * static_cast<double>(arc);
      const auto lo = static_cast<std::ptrdiff_t>(std::floor(target)) - 1;
      for (std::ptrdiff_t k = lo; k <= lo + 3; ++k) {
        const auto z = static_cast<PointIndex>(((k % n) + n) % n);
        const kernels::Argmin candidate{intermediate_defect(space, x, y, t, z), z};
        if (candidate < best) best = candidate;
      }
    }
  } else {
    best = kernels::omp::intermediate_argmin(space, x, y, t);
  }
  return GeodesicSample{x, y, t, best.index, space.distance(x, y), best.value};
}

std::string to_string(MetricViolation v) {
  switch (v) {
    case MetricViolation::None: return "none";
    case MetricViolation::Diagonal: return "diagonal";
    case MetricViolation::Nonnegativity: return "nonnegativity";
    case MetricViolation::Symmetry: return "symmetry";
    case MetricViolation::Triangle: return "triangle";
  }
  return "unknown";
}

MetricValidation validate_metric(const MetricMeasureSpace& space, std::uint64_t seed) {
  const std::size_t n = space.size();
  const double rounding = 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, space.diameter());

  struct Worst {
    double value = 0.0;
    std::array<PointIndex, 3> witness{};
    void offer(double v, std::array<PointIndex, 3> w) {
      if (v > value) {
        value = v;
        witness = w;
      }
    }
  };
  Worst diagonal, negative, symmetry, triangle;

  for (PointIndex i = 0; i < n; ++i) diagonal.offer(std::abs(space.distance(i, i)), {i, i, i});

  const auto check_pair = [&](PointIndex i, PointIndex j) {
    const double dij = space.distance(i, j);
    negative.offer(-dij, {i, j, j});
    symmetry.offer(std::abs(dij - space.distance(j, i)), {i, j, j});
  };

  MetricValidation report;
  if (n <= kExhaustiveTriangleLimit) {
    for (PointIndex i = 0; i < n; ++i)
      for (PointIndex j = 0; j < n; ++j) check_pair(i, j);
    const auto scan = kernels::omp::triangle_scan(space);
    triangle.offer(scan.worst, scan.witness);
    report.triples_checked = scan.checked;
  } else {
    report.sampled = true;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<PointIndex> pick(0, n - 1);
    for (std::size_t s = 0; s < kSampledTriples; ++s) {
      const PointIndex i = pick(rng), j = pick(rng), k = pick(rng);
      check_pair(i, j);
      triangle.offer(space.distance(i, k) - space.distance(i, j) - space.distance(j, k), {i, j, k});
    }
    report.triples_checked = kSampledTriples;
  }

  const std::array<std::pair<MetricViolation, const Worst*>, 4> checks{{
      {MetricViolation::Diagonal, &diagonal},
      {MetricViolation::Nonnegativity, &negative},
      {MetricViolation::Symmetry, &symmetry},
      {MetricViolation::Triangle, &triangle},
  }};
  for (const auto& [kind, worst] : checks) {
    // Diagonal and sign errors are never rounding artefacts.
    const double allowed =
        (kind == MetricViolation::Symmetry || kind == MetricViolation::Triangle) ? rounding : 0.0;
    if (worst->value > allowed) {
      report.pass = false;
      report.kind = kind;
      report.worst_violation = worst->value;
      report.witness = worst->witness;
      return report;
    }
    if (worst->value > report.worst_violation) {
      report.worst_violation = worst->value;
      report.witness = worst->witness;
    }
  }
  return report;
}

EdgeList read_edge_list(std::istream& in) {
  EdgeList list;
  std::string line;
  std::size_t line_no = 0;
  bool in_measure = false;
  std::vector<double> measure;
  std::size_t max_index = 0;
  bool any_edge = false;

  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    if (line[first] == '#') {
      std::string tag = line.substr(first + 1);
      tag.erase(0, tag.find_first_not_of(" \t"));
      tag.erase(tag.find_last_not_of(" \t\r") + 1);
      if (tag == "measure") {
        if (in_measure) throw ParseError("duplicate '# measure' section", line_no);
        in_measure = true;
      }
      continue;
    }
    std::istringstream fields(line);
    if (in_measure) {
      double w;
      while (fields >> w) measure.push_back(w);
      if (!fields.eof()) throw ParseError("malformed measure weight", line_no);
      continue;
    }
    long long i, j;
    double w;
    if (!(fields >> i >> j >> w)) throw ParseError("expected 'i j weight'", line_no);
    std::string extra;
    if (fields >> extra) throw ParseError("trailing token '" + extra + "'", line_no);
    if (i < 0 || j < 0) throw ParseError("negative point index", line_no);
    list.edges.push_back({static_cast<PointIndex>(i), static_cast<PointIndex>(j), w});
    max_index = std::max({max_index, static_cast<std::size_t>(i), static_cast<std::size_t>(j)});
    any_edge = true;
  }

  list.point_count = any_edge ? max_index + 1 : 0;
  if (in_measure) {
    if (any_edge && measure.size() < list.point_count) {
      throw ParseError(fmt::format("measure lists {} weights but edges reference {} points",
                                   measure.size(), list.point_count),
                       line_no);
    }
    list.point_count = std::max(list.point_count, measure.size());
    list.measure = std::move(measure);
  }
  return list;
}

EdgeList read_edge_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open edge list " + path.string());
  return read_edge_list(in);
}

MetricMeasureSpace load_graph_space(const std::filesystem::path& path) {
  EdgeList list = read_edge_list(path);
  return MetricMeasureSpace::graph(list.point_count, list.edges, std::move(list.measure));
}

}  // namespace eviflow
