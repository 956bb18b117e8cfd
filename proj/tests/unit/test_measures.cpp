#include <doctest.h>

#include <map>
#include <random>

#include <nlohmann/json.hpp>

#include "skembed/error.hpp"
#include "skembed/measures.hpp"

using namespace skembed;

namespace {

const DiscreteMeasure two_point({{-1, 0.5}, {1, 0.5}});
const DiscreteMeasure three_point({{-2, 0.25}, {0, 0.5}, {2, 0.25}});

DiscreteMeasure random_measure(std::mt19937_64& rng, int lo, int hi) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Atom> atoms;
  for (int i = lo; i <= hi; ++i) {
    if (u(rng) < 0.6) atoms.push_back({i, u(rng) + 0.01});
  }
  if (atoms.empty()) atoms.push_back({lo, 1.0});
  return DiscreteMeasure::from_masses(atoms);
}

// Spread mass symmetrically around each atom: produces a measure above mu in
// convex order.
DiscreteMeasure spread(const DiscreteMeasure& mu, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> d(0, 2);
  std::vector<Atom> atoms;
  for (const auto& a : mu.atoms()) {
    const int w = d(rng);
    if (w == 0) {
      atoms.push_back(a);
    } else {
      atoms.push_back({a.index - w, a.weight / 2});
      atoms.push_back({a.index + w, a.weight / 2});
    }
  }
  std::map<int, double> merged;
  for (const auto& a : atoms) merged[a.index] += a.weight;
  std::vector<Atom> out;
  for (const auto& [i, w] : merged) out.push_back({i, w});
  return DiscreteMeasure::from_masses(out);
}

}  // namespace

TEST_CASE("construction rules") {
  CHECK_THROWS_AS(DiscreteMeasure({{0, 0.5}, {0, 0.5}}), InvalidArgument);
  CHECK_THROWS_AS(DiscreteMeasure({{0, -0.1}, {1, 1.1}}), InvalidArgument);
  CHECK_THROWS_AS(DiscreteMeasure({{0, 0.5}, {1, 0.4}}), InvalidArgument);
  const DiscreteMeasure m({{3, 0.5}, {-1, 0.5}, {7, 0.0}});
  REQUIRE(m.size() == 2);
  CHECK(m.atoms()[0].index == -1);
  CHECK(m.min_index() == -1);
  CHECK(m.max_index() == 3);
  CHECK(m.weight(7) == 0.0);
  CHECK_FALSE(m.contains(7));
  CHECK(m.cdf(0) == 0.5);
  CHECK(m.cdf(-2) == 0.0);
  CHECK(m.cdf(3) == 1.0);

  const auto r = DiscreteMeasure::from_masses({{0, 0.2}, {1, 0.2}, {2, 1e-14}}, 1e-12);
  CHECK(r.size() == 2);
  CHECK(r.weight(0) == doctest::Approx(0.5));
}

TEST_CASE("moments") {
  CHECK(moment(two_point, 2) == doctest::Approx(1.0));
  CHECK(moment(three_point, 2) == doctest::Approx(2.0));
  for (int p = 1; p <= 4; ++p) CHECK(moment(DiscreteMeasure::dirac(0), p) == 0.0);
  CHECK(moment(two_point, 2, 0.5) == doctest::Approx(0.25));
  CHECK(mean(three_point) == 0.0);
  CHECK(variance(DiscreteMeasure({{1, 0.5}, {3, 0.5}})) == doctest::Approx(1.0));
}

TEST_CASE("potentials") {
  CHECK(potential(two_point, 0) == doctest::Approx(-1.0));
  CHECK(potential(DiscreteMeasure::dirac(0), 0) == 0.0);
  CHECK(potential(three_point, 1) == doctest::Approx(-1.5));
}

TEST_CASE("convex order examples") {
  CHECK(convex_order(DiscreteMeasure::dirac(0), two_point));
  CHECK_FALSE(convex_order(two_point, DiscreteMeasure::dirac(0)));
  CHECK(convex_order(two_point, three_point));
  CHECK_FALSE(convex_order(DiscreteMeasure::dirac(0), DiscreteMeasure::dirac(1)));
}

TEST_CASE("potential is concave on the grid") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const auto mu = random_measure(rng, -6, 6);
    for (int b = -9; b <= 9; ++b) {
      const double mid = potential(mu, b);
      const double chord = 0.5 * (potential(mu, b - 1) + potential(mu, b + 1));
      CHECK(mid >= chord - 1e-12);
    }
  }
}

TEST_CASE("convex order is reflexive and transitive") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 60; ++trial) {
    const auto a = random_measure(rng, -4, 4);
    CHECK(convex_order(a, a));
    const auto b = spread(a, rng);
    const auto c = spread(b, rng);
    CHECK(convex_order(a, b));
    CHECK(convex_order(b, c));
    CHECK(convex_order(a, c));
  }
  // Random triples, most not ordered: the implication must still hold.
  for (int trial = 0; trial < 300; ++trial) {
    const auto a = random_measure(rng, -2, 2);
    const auto b = random_measure(rng, -3, 3);
    const auto c = random_measure(rng, -4, 4);
    if (convex_order(a, b) && convex_order(b, c)) CHECK(convex_order(a, c));
  }
}

TEST_CASE("distances") {
  CHECK(total_variation(two_point, three_point) == doctest::Approx(1.0));
  CHECK(kolmogorov_distance(two_point, DiscreteMeasure::dirac(0)) == doctest::Approx(0.5));
  CHECK(max_atom_deviation(three_point, three_point) == 0.0);
  CHECK(max_atom_deviation(two_point, DiscreteMeasure({{-1, 0.25}, {1, 0.75}})) ==
        doctest::Approx(0.25));
}

TEST_CASE("json round trip") {
  const nlohmann::json j = three_point;
  CHECK(j.dump() == R"({"atoms":[[-2,0.25],[0,0.5],[2,0.25]]})");
  CHECK(j.get<DiscreteMeasure>() == three_point);
  CHECK_THROWS(nlohmann::json::parse(R"({"atoms":[[0,0.5]]})").get<DiscreteMeasure>());
}
