#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "eviflow/errors.hpp"
#include "eviflow/functionals.hpp"

using namespace eviflow;
using doctest::Approx;

namespace {

MetricMeasureSpace unit_graph(std::size_t n, std::vector<double> m) {
  std::vector<Edge> edges;
  for (std::size_t i = 0; i + 1 < n; ++i) edges.push_back({i, i + 1, 1.0});
  return MetricMeasureSpace::graph(n, edges, std::move(m));
}

ProbabilityMeasure random_measure(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> w(n);
  for (auto& x : w) x = unit(rng) < 0.3 ? 0.0 : unit(rng);
  w[rng() % n] += 0.1;
  return ProbabilityMeasure::normalized(std::move(w));
}

}  // namespace

TEST_CASE("potentials") {
  CHECK_THROWS_AS(Potential({kInfinity, kInfinity}), std::invalid_argument);
  CHECK_THROWS_AS(Potential({0.0, std::nan("")}), std::invalid_argument);
  CHECK_THROWS_AS(Potential({0.0, -kInfinity}), std::invalid_argument);
  const Potential v({1.0, kInfinity, -2.0});
  CHECK(v.finite_set().size() == 2);
  CHECK_FALSE(v.finite(1));

  const auto line = MetricMeasureSpace::interval(-2.0, 2.0, 5);
  CHECK_NOTHROW(Potential(line, {-4.0, -1.0, 0.0, -1.0, -4.0}, LowerBound{0.0, 1.0, 2}));
  CHECK_THROWS_AS(Potential(line, {-4.1, -1.0, 0.0, -1.0, -4.0}, LowerBound{0.0, 1.0, 2}),
                  std::invalid_argument);
  const auto q = Potential::from_formula(line, [](double x) { return x * x; });
  CHECK(q(0) == 4.0);
  CHECK(q(3) == 1.0);
}

TEST_CASE("potential CSV") {
  std::istringstream good("point_index,value\n2,inf\n0,1.5\n1,-3\n");
  const auto v = read_potential_csv(good, 3);
  CHECK(v(0) == 1.5);
  CHECK(v(1) == -3.0);
  CHECK_FALSE(v.finite(2));

  auto rejects = [](const std::string& text) {
    std::istringstream in(text);
    CHECK_THROWS_AS(read_potential_csv(in, 2), ParseError);
  };
  rejects("index,value\n0,1\n1,2\n");
  rejects("point_index,value\n0,1\n");
  rejects("point_index,value\n0,1\n0,2\n");
  rejects("point_index,value\n0,1\n2,2\n");
  rejects("point_index,value\n0,1\n1,abc\n");
  rejects("point_index,value\n0,1\n1,-inf\n");
  try {
    std::istringstream in("point_index,value\n0,1\n1,x\n");
    read_potential_csv(in, 2);
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
}

TEST_CASE("entropy and energy examples") {
  const auto four = unit_graph(4, {1, 1, 1, 1});
  CHECK(entropy(four, ProbabilityMeasure::uniform(4)) == Approx(-std::log(4.0)));
  CHECK(entropy(four, ProbabilityMeasure::dirac(4, 2)) == 0.0);
  const auto two = unit_graph(2, {1.0, 2.0});
  CHECK(entropy(two, ProbabilityMeasure::uniform(2)) == Approx(-1.5 * std::log(2.0)));
  const std::vector<double> reference{1.0, 0.0};
  CHECK(relative_entropy(reference, ProbabilityMeasure::uniform(2)) == kInfinity);
  CHECK(relative_entropy(reference, ProbabilityMeasure::dirac(2, 0)) == 0.0);

  const Potential v({0.0, 2.0});
  CHECK(potential_energy(Potential({0.0, 2.0, -1.0}), ProbabilityMeasure::dirac(3, 2)) == -1.0);
  CHECK(potential_energy(v, ProbabilityMeasure::uniform(2)) == 1.0);
  CHECK(potential_energy(Potential({0.0, kInfinity}), ProbabilityMeasure::uniform(2)) == kInfinity);
  CHECK(potential_energy(Potential({0.0, kInfinity}), ProbabilityMeasure::dirac(2, 0)) == 0.0);

  const auto pair = unit_graph(2, {1.0, 1.0});
  CHECK(regularized_energy(pair, Potential({0.0, 0.0}), ProbabilityMeasure::uniform(2), 1.0) ==
        Approx(-std::log(2.0)));
  CHECK(regularized_energy(pair, v, ProbabilityMeasure::uniform(2), 2.0) == Approx(1.0 - std::log(2.0) / 2.0));
  CHECK(regularized_energy(pair, Potential({0.0, kInfinity}), ProbabilityMeasure::uniform(2), 2.0) == kInfinity);
}

TEST_CASE("tilted reference gives the same functional") {
  const auto three = unit_graph(3, {1, 1, 1});
  const Potential v({0.5, -1.0, 2.0});
  CHECK(tilted_entropy(three, v, ProbabilityMeasure::dirac(3, 1), 4.0) == Approx(-1.0));
  CHECK(regularized_energy(three, v, ProbabilityMeasure::dirac(3, 1), 4.0) == Approx(-1.0));

  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + trial % 9;
    std::uniform_real_distribution<double> unit(0.1, 3.0);
    std::vector<double> m(n), values(n);
    for (auto& x : m) x = unit(rng);
    for (auto& x : values) x = unit(rng) - 1.5;
    const auto space = unit_graph(n, m);
    const Potential pot(values);
    const auto mu = random_measure(rng, n);
    const double k = unit(rng) * 10.0;
    CHECK(tilted_entropy(space, pot, mu, k) == Approx(regularized_energy(space, pot, mu, k)).epsilon(1e-12));
  }
}

TEST_CASE("entropy Jensen bound") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unit(0.05, 4.0);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + trial % 12;
    std::vector<double> m(n);
    double total = 0.0;
    for (auto& x : m) total += x = unit(rng);
    const auto space = unit_graph(n, m);
    CHECK(entropy(space, random_measure(rng, n)) >= -std::log(total) - 1e-12);
  }
}

TEST_CASE("regularized energy approaches the potential energy as n grows") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + trial % 8;
    std::vector<double> values(n);
    for (auto& x : values) x = 4.0 * unit(rng) - 2.0;
    const auto space = unit_graph(n, std::vector<double>(n, 1.0));
    const Potential v(values);
    const auto mu = random_measure(rng, n);
    REQUIRE(entropy(space, mu) <= 0.0);
    const double s = potential_energy(v, mu);
    double previous = kInfinity;
    for (double k : {0.5, 1.0, 3.0, 10.0, 100.0}) {
      const double gap = std::abs(regularized_energy(space, v, mu, k) - s);
      CHECK(gap <= previous + 1e-15);
      previous = gap;
    }
  }
}

TEST_CASE("convexity examples") {
  const auto flat_line = MetricMeasureSpace::interval(-1.0, 1.0, 21);
  const auto constant = Potential::from_formula(flat_line, [](double) { return 3.0; });
  const auto flat = kappa_convexity_report(flat_line, constant, 0.0, 100000);
  CHECK(flat.pass());
  CHECK(flat.worst_violation <= 1e-12);

  const auto line = MetricMeasureSpace::interval(-1.0, 1.0, 201);
  const auto square = Potential::from_formula(line, [](double x) { return x * x; });
  const auto two = kappa_convexity_report(line, square, 2.0, 100000);
  CHECK(two.pass());
  CHECK(two.samples_checked == 201u * 200u * 9u);
  CHECK(two.worst_violation <= two.quantization_slack);
  CHECK(two.quantization_slack <= 2.0 * 2.0 * 0.005 + 1e-9);

  const auto three = kappa_convexity_report(line, square, 3.0, 100000);
  CHECK_FALSE(three.pass());
  CHECK(three.worst_violation == Approx(0.5));
  CHECK(three.witness.x == 0);
  CHECK(three.witness.y == 200);
  CHECK(three.witness.t == 0.5);
  CHECK(three.witness.z == 100);

  CHECK(convexity_t_grid().size() == 9);
  CHECK(convexity_t_grid().front() == Approx(0.1));
}

TEST_CASE("convexity sampling and slack") {
  const auto line = MetricMeasureSpace::interval(-1.0, 1.0, 101);
  const auto well = Potential::from_formula(line, [](double x) { return (x * x - 0.25) * (x * x - 0.25); });
  const auto a = kappa_convexity_report(line, well, -2.0, 500, 9);
  const auto b = kappa_convexity_report(line, well, -2.0, 500, 9);
  CHECK(a.samples_checked <= 500u * 9u);
  CHECK(a.samples_checked >= 480u * 9u);
  CHECK(a.worst_violation == b.worst_violation);
  CHECK(a.witness.z == b.witness.z);
  CHECK(a.lipschitz_estimate > 0.0);
  CHECK(a.quantization_slack == Approx(a.lipschitz_estimate * a.max_defect));
  const auto forced = kappa_convexity_report(line, well, -2.0, 500, 9, 0.25);
  CHECK(forced.quantization_slack == 0.25);
  CHECK_THROWS_AS(kappa_convexity_report(line, well, 0.0, 0), std::invalid_argument);
}

TEST_CASE("convexity violations are monotone in kappa") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const auto line = MetricMeasureSpace::interval(-1.0, 1.0, 41);
    const double a = unit(rng), b = unit(rng), c = unit(rng);
    const auto v = Potential::from_formula(line, [&](double x) { return a * x * x * x * x + b * x * x + c * x; });
    double previous = -kInfinity;
    bool passed_above = false;
    for (double kappa : {4.0, 2.0, 0.0, -2.0, -4.0}) {
      // Walk downward: once a modulus passes, every smaller one must too.
      const auto report = kappa_convexity_report(line, v, kappa, 100000, 0, 0.0);
      if (previous != -kInfinity) CHECK(report.worst_violation <= previous + 1e-12);
      if (passed_above) CHECK(report.pass());
      passed_above = passed_above || report.pass();
      previous = report.worst_violation;
    }
  }
}

TEST_CASE("convexity on spaces with +inf points") {
  const auto line = MetricMeasureSpace::interval(0.0, 1.0, 11);
  std::vector<double> values(11, kInfinity);
  values[3] = 0.0;
  values[4] = 0.0;
  const auto report = kappa_convexity_report(line, Potential(values), 0.0, 1000);
  CHECK(report.samples_checked == 2u * 9u);
}
