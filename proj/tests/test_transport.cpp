#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "eviflow/errors.hpp"
#include "eviflow/transport.hpp"
#include "oracles.hpp"

using namespace eviflow;
using doctest::Approx;

namespace {

ProbabilityMeasure random_measure(std::mt19937_64& rng, std::size_t n, double zero_fraction = 0.3) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> w(n);
  for (auto& x : w) x = unit(rng) < zero_fraction ? 0.0 : unit(rng);
  w[rng() % n] += 0.5;
  return ProbabilityMeasure::normalized(std::move(w));
}

// Random points in the unit square with Euclidean distances.
MetricMeasureSpace random_plane(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> xs(n), ys(n), d(n * n);
  for (std::size_t i = 0; i < n; ++i) xs[i] = unit(rng), ys[i] = unit(rng);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) d[i * n + j] = std::hypot(xs[i] - xs[j], ys[i] - ys[j]);
  return MetricMeasureSpace::from_matrix(n, d);
}

std::vector<double> squared_matrix(const MetricMeasureSpace& space) {
  const std::size_t n = space.size();
  std::vector<double> d2(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) d2[i * n + j] = space.squared_distance(i, j);
  return d2;
}

std::vector<double> as_vector(const ProbabilityMeasure& mu) { return {mu.weights().begin(), mu.weights().end()}; }

double max_d2(const MetricMeasureSpace& space) { return space.diameter() * space.diameter(); }

}  // namespace

TEST_CASE("probability measures") {
  CHECK_THROWS_AS(ProbabilityMeasure({0.5, 0.6}), std::invalid_argument);
  CHECK_THROWS_AS(ProbabilityMeasure({1.5, -0.5}), std::invalid_argument);
  CHECK_THROWS_AS(ProbabilityMeasure::normalized({0.0, 0.0}), std::invalid_argument);
  const auto u = ProbabilityMeasure::uniform(4);
  CHECK(u[2] == 0.25);
  CHECK(ProbabilityMeasure::dirac(3, 1).support() == std::vector<PointIndex>{1});
}

TEST_CASE("exact transport examples") {
  const auto line = MetricMeasureSpace::interval(0.0, 2.0, 3);
  const auto a = ProbabilityMeasure::dirac(3, 0), b = ProbabilityMeasure::dirac(3, 2);
  const auto diracs = w2_exact(line, a, b);
  CHECK(diracs.squared_cost == 4.0);
  REQUIRE(diracs.coupling.entries().size() == 1);
  CHECK(diracs.coupling.entries()[0] == CouplingEntry{0, 2, 1.0});
  CHECK(wasserstein2(line, a, b) == line.distance(0, 2));

  const ProbabilityMeasure mu({0.5, 0.5, 0.0}), nu({0.0, 0.5, 0.5});
  const auto same = w2_exact(line, mu, mu);
  CHECK(same.squared_cost == 0.0);
  for (const auto& e : same.coupling.entries()) CHECK(e.source == e.target);

  const auto shift = w2_exact(line, mu, nu);
  CHECK(shift.squared_cost == Approx(1.0));
  CHECK(oracle::small_w2_squared(squared_matrix(line), 3, as_vector(mu), as_vector(nu)) == Approx(1.0));
  CHECK(shift.method == TransportMethod::Exact);
  CHECK(std::abs(shift.dual_gap_or_tolerance) <= 1e-9 * 4.0);

  CHECK_THROWS_AS(w2_exact(line, mu, ProbabilityMeasure::uniform(4)), std::invalid_argument);
}

TEST_CASE("entropic transport examples") {
  const auto line = MetricMeasureSpace::interval(0.0, 2.0, 3);
  const double eps = 1e-3 * 4.0;
  const auto x = ProbabilityMeasure::dirac(3, 1);
  CHECK(w2_entropic(line, x, x, eps).squared_cost == 0.0);
  CHECK(w2_entropic(line, x, ProbabilityMeasure::dirac(3, 2), eps).squared_cost == Approx(1.0));
  const ProbabilityMeasure mu({0.5, 0.5, 0.0}), nu({0.0, 0.5, 0.5});
  const auto r = w2_entropic(line, mu, nu, eps);
  CHECK(std::abs(r.squared_cost - 1.0) <= 0.01 * 4.0);
  CHECK(r.method == TransportMethod::Entropic);
  CHECK_THROWS_AS(w2_entropic(line, mu, nu, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(w2_entropic(line, ProbabilityMeasure::uniform(3), ProbabilityMeasure({0.98, 0.01, 0.01}), 1e-4, 3),
                  IterationLimitError);
}

TEST_CASE("variance") {
  const auto line = MetricMeasureSpace::interval(0.0, 2.0, 3);
  CHECK(variance2(line, ProbabilityMeasure::dirac(3, 2)) == 0.0);
  CHECK(variance2(MetricMeasureSpace::interval(0.0, 1.0, 2), ProbabilityMeasure::uniform(2)) == Approx(0.5));
  CHECK(variance2(line, ProbabilityMeasure::uniform(3)) == Approx(4.0 / 3.0));
}

TEST_CASE("exact solver matches the polytope oracle on small instances") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 3 + trial % 2;
    const auto space = random_plane(rng, n);
    const auto mu = random_measure(rng, n, 0.15), nu = random_measure(rng, n, 0.15);
    const auto exact = w2_exact(space, mu, nu);
    const double expected = oracle::small_w2_squared(squared_matrix(space), n, as_vector(mu), as_vector(nu));
    REQUIRE(exact.squared_cost == Approx(expected).epsilon(1e-10).scale(1.0));
    CHECK(exact.squared_cost == Approx(exact.coupling.cost(space)).epsilon(1e-12));
  }
}

TEST_CASE("exact solver matches the quantile coupling on the line") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 5 + trial % 26;
    const auto line = MetricMeasureSpace::interval(-1.0, 2.0, n);
    const auto mu = random_measure(rng, n), nu = random_measure(rng, n);
    std::vector<std::pair<double, double>> a, b;
    for (PointIndex i = 0; i < n; ++i) {
      if (mu[i] > 0) a.push_back({line.coord(i), mu[i]});
      if (nu[i] > 0) b.push_back({line.coord(i), nu[i]});
    }
    const auto r = w2_exact(line, mu, nu);
    REQUIRE(r.squared_cost == Approx(oracle::quantile_w2_squared(a, b)).epsilon(1e-10).scale(1.0));
    CHECK(std::abs(r.dual_gap_or_tolerance) <= 1e-9 * max_d2(line));
  }
}

TEST_CASE("W2 is a metric on random instances") {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 4 + trial % 27;
    const auto space = random_plane(rng, n);
    const auto a = random_measure(rng, n), b = random_measure(rng, n), c = random_measure(rng, n);
    const double ab = wasserstein2(space, a, b), ba = wasserstein2(space, b, a);
    const double bc = wasserstein2(space, b, c), ac = wasserstein2(space, a, c);
    CHECK(std::abs(ab - ba) <= 1e-9);
    CHECK(ac <= ab + bc + 1e-9);
  }
}

TEST_CASE("entropic cost decreases to the exact cost as epsilon shrinks") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 6 + trial % 10;
    const auto space = random_plane(rng, n);
    const auto mu = random_measure(rng, n), nu = random_measure(rng, n);
    const double exact = w2_exact(space, mu, nu).squared_cost, scale = max_d2(space);
    double previous = oracle::inf;
    for (double f : {1e-1, 1e-2, 1e-3}) {
      const double cost = w2_entropic(space, mu, nu, f * scale).squared_cost;
      CHECK(cost >= exact - 1e-9);
      CHECK(cost <= previous + 1e-9);
      previous = cost;
    }
  }
}

TEST_CASE("restrictions of optimal couplings are optimal") {
  std::mt19937_64 rng(37);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const auto space = random_plane(rng, 3);
    const auto mu = random_measure(rng, 3, 0.0), nu = random_measure(rng, 3, 0.0);
    const auto q = w2_exact(space, mu, nu).coupling;
    std::vector<double> f(3);
    for (auto& x : f) x = unit(rng);
    std::vector<double> first(3, 0.0), second(3, 0.0);
    double total = 0.0, cost = 0.0;
    for (const auto& e : q.entries()) total += f[e.source] * e.mass;
    for (const auto& e : q.entries()) {
      const double mass = f[e.source] * e.mass / total;
      first[e.source] += mass;
      second[e.target] += mass;
      cost += mass * space.squared_distance(e.source, e.target);
    }
    CHECK(cost == Approx(oracle::small_w2_squared(squared_matrix(space), 3, first, second)).epsilon(1e-10).scale(1.0));
  }
}

TEST_CASE("couplings validate their marginals and export as CSV") {
  const ProbabilityMeasure a({0.5, 0.5}), b({0.25, 0.75});
  CHECK_THROWS_AS(Coupling({{0, 0, 0.5}, {1, 1, 0.5}}, a, b), std::invalid_argument);
  CHECK_THROWS_AS(Coupling({{0, 0, -0.25}, {0, 1, 0.75}, {1, 0, 0.5}}, a, b), std::invalid_argument);
  const Coupling q({{1, 1, 0.5}, {0, 0, 0.25}, {0, 1, 0.25}}, a, b);
  std::ostringstream out;
  write_coupling_csv(out, q);
  CHECK(out.str() == "i,j,mass\n0,0,0.25\n0,1,0.25\n1,1,0.5\n");
}
