#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "eviflow/errors.hpp"
#include "eviflow/kernels.hpp"
#include "eviflow/space.hpp"
#include "oracles.hpp"

using namespace eviflow;
using doctest::Approx;

TEST_CASE("interval builder") {
  const auto two = MetricMeasureSpace::interval(0.0, 1.0, 2);
  CHECK(two.size() == 2);
  CHECK(two.coord(0) == 0.0);
  CHECK(two.coord(1) == 1.0);
  CHECK(two.distance(0, 1) == 1.0);

  const auto grid = MetricMeasureSpace::interval(-2.0, 2.0, 401);
  CHECK(grid.resolution() == Approx(0.01));
  CHECK(grid.distance(0, 400) == Approx(4.0));
  CHECK(grid.measure(17) == Approx(0.01));

  const auto three = MetricMeasureSpace::interval(0.0, 1.0, 3);
  CHECK(three.distance(1, 0) == 0.5);
  CHECK(three.distance(1, 2) == 0.5);

  CHECK_THROWS_AS(MetricMeasureSpace::interval(0.0, 1.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(MetricMeasureSpace::interval(1.0, 1.0, 5), std::invalid_argument);
  CHECK_THROWS_AS(MetricMeasureSpace::interval(2.0, 1.0, 5), std::invalid_argument);
}

TEST_CASE("circle builder") {
  const auto c4 = MetricMeasureSpace::circle(4, 1.0);
  CHECK(c4.distance(0, 2) == Approx(std::numbers::pi));
  CHECK(c4.distance(0, 1) == Approx(std::numbers::pi / 2));
  CHECK(c4.distance(0, 3) == Approx(std::numbers::pi / 2));
  const auto c2 = MetricMeasureSpace::circle(2, 1.0);
  CHECK(c2.distance(0, 1) == Approx(std::numbers::pi));
  CHECK(c4.diameter() == Approx(std::numbers::pi));
  CHECK_THROWS_AS(MetricMeasureSpace::circle(1, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(MetricMeasureSpace::circle(5, 0.0), std::invalid_argument);
}

TEST_CASE("graph builder") {
  const std::vector<Edge> path{{0, 1, 1.0}, {1, 2, 1.0}};
  CHECK(MetricMeasureSpace::graph(3, path).distance(0, 2) == 2.0);

  const std::vector<Edge> triangle{{0, 1, 1.0}, {1, 2, 1.0}, {0, 2, 3.0}};
  const auto tri = MetricMeasureSpace::graph(3, triangle);
  const auto brute = oracle::all_simple_paths(3, {{0, 1, 1.0}, {1, 2, 1.0}, {0, 2, 3.0}});
  CHECK(tri.distance(0, 2) == brute[2]);
  CHECK(tri.distance(0, 2) == 2.0);

  const std::vector<Edge> disjoint{{0, 1, 1.0}, {2, 3, 1.0}};
  CHECK_THROWS_AS(MetricMeasureSpace::graph(4, disjoint), DisconnectedGraphError);
  const std::vector<Edge> zero{{0, 1, 0.0}};
  CHECK_THROWS_AS(MetricMeasureSpace::graph(2, zero), std::invalid_argument);
  const std::vector<Edge> negative{{0, 1, -1.0}};
  CHECK_THROWS_AS(MetricMeasureSpace::graph(2, negative), std::invalid_argument);
  const std::vector<Edge> outside{{0, 5, 1.0}};
  CHECK_THROWS_AS(MetricMeasureSpace::graph(2, outside), std::invalid_argument);
  CHECK_THROWS_AS(MetricMeasureSpace::graph(2, path, std::vector<double>{1.0, -1.0}),
                  std::invalid_argument);
}

TEST_CASE("graph metric matches path enumeration on small graphs") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> weight(0.1, 4.0);
  std::bernoulli_distribution coin(0.45);
  int graphs = 0;
  for (int trial = 0; trial < 400; ++trial) {
    const std::size_t n = 2 + trial % 5;  // 2..6 vertices
    std::vector<Edge> edges;
    std::vector<oracle::WeightedEdge> plain;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const double w = weight(rng);
      edges.push_back({i, i + 1, w});  // keeps the graph connected
      plain.push_back({i, i + 1, w});
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 2; j < n; ++j)
        if (coin(rng)) {
          const double w = weight(rng);
          edges.push_back({i, j, w});
          plain.push_back({i, j, w});
        }
    // Relabel so the backbone is not always the identity path.
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    for (auto& e : edges) e = {perm[e.from], perm[e.to], e.weight};
    for (auto& e : plain) e = {perm[e.a], perm[e.b], e.w};
    const auto space = MetricMeasureSpace::graph(n, edges);
    const auto brute = oracle::all_simple_paths(n, plain);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) REQUIRE(space.distance(i, j) == Approx(brute[i * n + j]).epsilon(1e-12));
    ++graphs;
  }
  CHECK(graphs == 400);
}

TEST_CASE("intermediate points") {
  const auto grid = MetricMeasureSpace::interval(0.0, 1.0, 11);
  const auto mid = intermediate_point(grid, 0, 10, 0.5);
  CHECK(mid.midpoint == 5);
  CHECK(mid.defect == Approx(0.0).epsilon(1e-15));
  CHECK(mid.speed == Approx(1.0));

  const auto c4 = MetricMeasureSpace::circle(4, 1.0);
  const auto tie = intermediate_point(c4, 0, 2, 0.5);
  CHECK(tie.midpoint == 1);
  CHECK(tie.defect == Approx(0.0).epsilon(1e-15));

  const std::vector<Edge> path{{0, 1, 1.0}, {1, 2, 2.0}};
  const auto g = MetricMeasureSpace::graph(3, path);
  for (PointIndex y = 0; y < 3; ++y) {
    const auto start = intermediate_point(g, 2, y, 0.0);
    CHECK(start.midpoint == 2);
    CHECK(start.defect == 0.0);
  }
  CHECK_THROWS_AS(intermediate_point(g, 0, 3, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(intermediate_point(g, 0, 1, 1.5), std::invalid_argument);
}

TEST_CASE("interval intermediate defect is at most h/2") {
  std::mt19937_64 rng(9);
  const auto grid = MetricMeasureSpace::interval(-1.0, 1.0, 257);
  std::uniform_int_distribution<std::size_t> pick(0, grid.size() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 5000; ++trial) {
    const auto s = intermediate_point(grid, pick(rng), pick(rng), unit(rng));
    REQUIRE(s.defect <= grid.resolution() / 2 + 1e-15);
  }
}

TEST_CASE("closed-form intermediate points match the exhaustive scan") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (const auto& space : {MetricMeasureSpace::interval(-1.0, 3.0, 301), MetricMeasureSpace::circle(300, 1.5),
                            MetricMeasureSpace::circle(301, 0.7)}) {
    std::uniform_int_distribution<std::size_t> pick(0, space.size() - 1);
    for (int trial = 0; trial < 3000; ++trial) {
      const auto x = pick(rng), y = trial % 10 == 0 ? (x + space.size() / 2) % space.size() : pick(rng);
      const double t = trial % 7 == 0 ? 0.5 : unit(rng);
      const auto fast = intermediate_point(space, x, y, t);
      const auto scan = kernels::serial::intermediate_argmin(space, x, y, t);
      REQUIRE(fast.defect == scan.value);
      REQUIRE(fast.midpoint == scan.index);
    }
  }
}

TEST_CASE("metric validation") {
  CHECK(validate_metric(MetricMeasureSpace::interval(0.0, 1.0, 50)).pass);
  CHECK(validate_metric(MetricMeasureSpace::circle(60, 1.0)).pass);
  const std::vector<Edge> ring{{0, 1, 1.0}, {1, 2, 1.0}, {2, 3, 1.0}, {3, 0, 2.5}};
  CHECK(validate_metric(MetricMeasureSpace::graph(4, ring)).pass);

  const auto bad = MetricMeasureSpace::from_matrix(3, {0, 1, 5, 1, 0, 1, 5, 1, 0});
  const auto report = validate_metric(bad);
  CHECK_FALSE(report.pass);
  CHECK(report.kind == MetricViolation::Triangle);
  CHECK(report.worst_violation == Approx(3.0));
  CHECK(report.witness[1] == 1);
  CHECK(std::min(report.witness[0], report.witness[2]) == 0);
  CHECK(std::max(report.witness[0], report.witness[2]) == 2);

  const auto negative = MetricMeasureSpace::from_matrix(2, {0, -1, -1, 0});
  CHECK(validate_metric(negative).kind == MetricViolation::Nonnegativity);
  const auto diagonal = MetricMeasureSpace::from_matrix(2, {0.5, 1, 1, 0});
  CHECK(validate_metric(diagonal).kind == MetricViolation::Diagonal);
  const auto asym = MetricMeasureSpace::from_matrix(2, {0, 1, 2, 0});
  CHECK(validate_metric(asym).kind == MetricViolation::Symmetry);

  const auto big = validate_metric(MetricMeasureSpace::interval(0.0, 1.0, 1000), 3);
  CHECK(big.pass);
  CHECK(big.sampled);
  CHECK(big.triples_checked == kSampledTriples);
}

TEST_CASE("edge-list files") {
  std::istringstream text(
      "# comment\n"
      "0 1 1.0\n"
      "1 2 2.5\n"
      "\n"
      "# measure\n"
      "1.0\n2.0\n0.5\n");
  const auto list = read_edge_list(text);
  CHECK(list.point_count == 3);
  CHECK(list.edges.size() == 2);
  REQUIRE(list.measure.has_value());
  CHECK((*list.measure)[1] == 2.0);

  std::istringstream broken("0 1 1.0\n1 two 2.0\n");
  try {
    read_edge_list(broken);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  std::istringstream trailing("0 1 1.0 7\n");
  CHECK_THROWS_AS(read_edge_list(trailing), ParseError);
  std::istringstream negative("0 -1 1.0\n");
  CHECK_THROWS_AS(read_edge_list(negative), ParseError);

  const auto ring = load_graph_space(std::string(EVIFLOW_SOURCE_DIR) + "/scenarios/ring.edges");
  CHECK(ring.size() == 8);
  CHECK(ring.distance(0, 4) == 3.0);
  CHECK(ring.distance(2, 5) == 3.5);
}
