#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace eviflow {

using PointIndex = std::size_t;

enum class SpaceKind { Interval, Circle, Graph };

struct Edge {
  PointIndex from;
  PointIndex to;
  double weight;
};

/// Finite metric measure space (X, d, m).
///
/// Interval and circle spaces evaluate the metric from point indices on
/// demand, so grids with tens of thousands of points cost O(n) memory. Graph
/// spaces store the dense all-pairs shortest-path matrix. Spaces are immutable
/// once built and may be shared between threads.
class MetricMeasureSpace {
 public:
  /// n evenly spaced points on [a, b]; every point carries weight (b-a)/(n-1).
  static MetricMeasureSpace interval(double a, double b, std::size_t n);

  /// n points on a circle of the given radius with the arc-length metric.
  static MetricMeasureSpace circle(std::size_t n, double radius);

  /// Shortest-path metric of a connected graph with positive edge weights.
  /// The measure defaults to 1 at every vertex.
  static MetricMeasureSpace graph(std::size_t n, std::span<const Edge> edges,
                                  std::optional<std::vector<double>> measure = std::nullopt);

  /// Wraps a dense row-major distance matrix without checking the metric
  /// axioms; validate_metric() reports on them.
  static MetricMeasureSpace from_matrix(std::size_t n, std::vector<double> distances,
                                        std::optional<std::vector<double>> measure = std::nullopt);

  std::size_t size() const noexcept { return n_; }
  SpaceKind kind() const noexcept { return kind_; }

  double distance(PointIndex i, PointIndex j) const noexcept {
    switch (kind_) {
      case SpaceKind::Interval:
        return static_cast<double>(i > j ? i - j : j - i) * spacing_;
      case SpaceKind::Circle: {
        const std::size_t k = i > j ? i - j : j - i;
        return static_cast<double>(k < n_ - k ? k : n_ - k) * spacing_;
      }
      case SpaceKind::Graph:
        break;
    }
    return matrix_[i * n_ + j];
  }

  double squared_distance(PointIndex i, PointIndex j) const noexcept {
    const double d = distance(i, j);
    return d * d;
  }

  double measure(PointIndex i) const noexcept { return measure_[i]; }
  std::span<const double> measure() const noexcept { return measure_; }
  double total_measure() const noexcept;

  /// Interval: position on the line. Circle: arc length from point 0.
  /// Graph: the vertex index.
  double coord(PointIndex i) const noexcept;

  /// Grid spacing for interval and circle spaces; the smallest positive
  /// distance for graph spaces.
  double resolution() const noexcept { return spacing_; }

  double diameter() const noexcept { return diameter_; }

  /// Point whose coordinate is closest to c (ties to the smaller index).
  /// Graph spaces treat c as a vertex index.
  PointIndex nearest_point(double c) const;

  /// Dense row-major distance matrix (graph spaces only, empty otherwise).
  std::span<const double> matrix() const noexcept { return matrix_; }

  /// Index offset range containing every point within distance r of a grid
  /// point. Meaningful for interval and circle spaces.
  std::size_t offsets_within(double r) const noexcept;

 private:
  MetricMeasureSpace() = default;

  SpaceKind kind_ = SpaceKind::Interval;
  std::size_t n_ = 0;
  double origin_ = 0.0;
  double span_ = 0.0;
  double spacing_ = 0.0;
  double diameter_ = 0.0;
  std::vector<double> matrix_;
  std::vector<double> measure_;
};

/// A sampled t-intermediate point z of (x, y) and how far it is from exact.
struct GeodesicSample {
  PointIndex from;
  PointIndex to;
  double t;
  PointIndex midpoint;
  double speed;   // d(x, y)
  double defect;  // max(|d(x,z) - t d(x,y)|, |d(z,y) - (1-t) d(x,y)|)
};

double intermediate_defect(const MetricMeasureSpace& space, PointIndex x, PointIndex y,
                           double t, PointIndex z) noexcept;

/// Point minimising the intermediate defect, ties to the smallest index.
/// Interval spaces use the closed form; other spaces scan every point.
GeodesicSample intermediate_point(const MetricMeasureSpace& space, PointIndex x, PointIndex y,
                                  double t);

enum class MetricViolation { None, Diagonal, Nonnegativity, Symmetry, Triangle };

std::string to_string(MetricViolation v);

struct MetricValidation {
  bool pass = true;
  MetricViolation kind = MetricViolation::None;
  double worst_violation = 0.0;
  std::array<PointIndex, 3> witness{};  // offending pair uses the first two
  std::size_t triples_checked = 0;
  bool sampled = false;
};

inline constexpr std::size_t kExhaustiveTriangleLimit = 300;
inline constexpr std::size_t kSampledTriples = 100000;

/// Checks zero diagonal, nonnegativity, symmetry and the triangle inequality.
/// Above kExhaustiveTriangleLimit points, pairs and triples are sampled
/// uniformly with the given seed. Violations up to a few ulps of the diameter
/// are rounding and do not fail the check, but are still reported.
MetricValidation validate_metric(const MetricMeasureSpace& space, std::uint64_t seed = 0);

struct EdgeList {
  std::size_t point_count = 0;
  std::vector<Edge> edges;
  std::optional<std::vector<double>> measure;
};

/// Parses "i j weight" lines with an optional "# measure" footer listing one
/// weight per point. Other lines starting with '#' are comments.
EdgeList read_edge_list(std::istream& in);
EdgeList read_edge_list(const std::filesystem::path& path);
MetricMeasureSpace load_graph_space(const std::filesystem::path& path);

}  // namespace eviflow
