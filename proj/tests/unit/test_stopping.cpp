#include <doctest.h>

#include <functional>
#include <memory>
#include <random>

#include <nlohmann/json.hpp>

#include "skembed/costs.hpp"
#include "skembed/error.hpp"
#include "skembed/stopping.hpp"

using namespace skembed;

namespace {

using Rule = std::function<double(const AugmentedState&)>;

RandomizedStoppingTime make(const LatticeSpec& spec, const DiscreteMeasure& lambda,
                            const Rule& rule) {
  auto g = std::make_shared<const StateGraph>(enumerate_reachable(spec, lambda));
  std::vector<double> p(g->size());
  for (std::size_t s = 0; s < g->size(); ++s) p[s] = g->is_terminal(s) ? 1.0 : rule(g->state(s));
  return from_stop_probabilities(g, lambda, p);
}

Rule at_time(int k) {
  return [k](const AugmentedState& s) { return s.k == k ? 1.0 : 0.0; };
}

AugmentedState st(int k, int x) { return {k, x, std::nullopt, std::nullopt, std::nullopt}; }

double stopped_at(const RandomizedStoppingTime& xi, const AugmentedState& s) {
  return xi.stopped(xi.graph().index_of(s));
}

RandomizedStoppingTime random_rule(std::mt19937_64& rng, const LatticeSpec& spec,
                                   const DiscreteMeasure& lambda) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto g = std::make_shared<const StateGraph>(enumerate_reachable(spec, lambda));
  std::vector<double> p(g->size());
  for (std::size_t s = 0; s < g->size(); ++s) {
    const double r = u(rng);
    p[s] = g->is_terminal(s) ? 1.0 : (r < 0.3 ? 0.0 : r < 0.5 ? 1.0 : u(rng));
  }
  return from_stop_probabilities(g, lambda, p);
}

}  // namespace

TEST_CASE("stop probability examples") {
  const auto one = LatticeSpec::symmetric(1);
  const auto lam = DiscreteMeasure::dirac(0);
  const auto a = make(one, lam, at_time(1));
  CHECK(stopped_at(a, st(1, 1)) == 0.5);
  CHECK(stopped_at(a, st(1, -1)) == 0.5);

  const auto four = LatticeSpec::symmetric(4);
  const auto horizon = make(four, lam, [](const AugmentedState&) { return 0.0; });
  const DiscreteMeasure binomial({{-4, 1.0 / 16}, {-2, 4.0 / 16}, {0, 6.0 / 16},
                                  {2, 4.0 / 16}, {4, 1.0 / 16}});
  CHECK(max_atom_deviation(pushforward_law(horizon), binomial) < 1e-15);

  const auto split = make(one, lam, [](const AugmentedState& s) { return s.k == 0 ? 0.5 : 1.0; });
  CHECK(stopped_at(split, st(0, 0)) == 0.5);
  CHECK(stopped_at(split, st(1, 1)) == 0.25);
  CHECK(stopped_at(split, st(1, -1)) == 0.25);
}

TEST_CASE("invalid stop probabilities") {
  const auto spec = LatticeSpec::symmetric(2);
  const auto lam = DiscreteMeasure::dirac(0);
  auto g = std::make_shared<const StateGraph>(enumerate_reachable(spec, lam));
  std::vector<double> p(g->size(), 0.0);
  CHECK_THROWS_AS(from_stop_probabilities(g, lam, p), InvalidArgument);  // horizon not 1
  for (std::size_t s = 0; s < g->size(); ++s) p[s] = g->is_terminal(s) ? 1.0 : 0.0;
  p[0] = 1.5;
  CHECK_THROWS_AS(from_stop_probabilities(g, lam, p), InvalidArgument);
  p.pop_back();
  CHECK_THROWS_AS(from_stop_probabilities(g, lam, p), InvalidArgument);
}

TEST_CASE("pushforward and moments") {
  const auto spec = LatticeSpec::symmetric(4);
  const auto lam = DiscreteMeasure::dirac(0);
  const auto two = make(spec, lam, at_time(2));
  CHECK(pushforward_law(two) == DiscreteMeasure({{-2, 0.25}, {0, 0.5}, {2, 0.25}}));
  CHECK(pushforward_law(make(spec, lam, at_time(1))) == DiscreteMeasure({{-1, 0.5}, {1, 0.5}}));
  CHECK(pushforward_law(make(spec, lam, at_time(0))) == lam);

  CHECK(expected_time(two) == 2.0);
  CHECK(expected_cost(two, root_cost(spec)) == 4.0);
  const auto split = make(spec, lam, [](const AugmentedState& s) { return s.k == 0 ? 0.5 : 1.0; });
  CHECK(expected_time(split) == 0.5);
}

TEST_CASE("stopped law at a time") {
  const auto spec = LatticeSpec::symmetric(4);
  const auto lam = DiscreteMeasure::dirac(0);
  const auto two = make(spec, lam, at_time(2));
  CHECK(stopped_law_at(two, 1) == DiscreteMeasure({{-1, 0.5}, {1, 0.5}}));
  CHECK(stopped_law_at(two, 0) == lam);
  CHECK(stopped_law_at(two, 4) == pushforward_law(two));
  CHECK(stopped_law_at(two, 3) == pushforward_law(two));
}

TEST_CASE("conditional rules") {
  const auto spec = LatticeSpec::symmetric(2);
  const auto lam = DiscreteMeasure::dirac(0);

  const auto c1 = conditional(make(spec, lam, at_time(2)), st(1, 1));
  CHECK(expected_time(c1) == 1.0);
  CHECK(pushforward_law(c1) == DiscreteMeasure({{0, 0.5}, {2, 0.5}}));

  const auto c2 = conditional(make(spec, lam, at_time(1)), st(1, 1));
  CHECK(expected_time(c2) == 0.0);

  const auto half = make(spec, lam, [](const AugmentedState& s) {
    return s.k == 1 && s.x == 1 ? 0.5 : 0.0;
  });
  const auto c3 = conditional(half, st(1, 1));
  CHECK(c3.stopped(0) == 0.5);
  CHECK(expected_time(c3) == 0.5);

  // Unreached state: instant stop.
  const auto gone = make(spec, lam, at_time(0));
  CHECK(expected_time(conditional(gone, st(1, -1))) == 0.0);
}

TEST_CASE("expected time equals the variance increase, random rules") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 60; ++trial) {
    const double dx = trial % 3 == 0 ? 0.5 : 1.0;
    const auto spec = LatticeSpec::symmetric(2 + trial % 9, dx, {}, {-1, 0, 1});
    const DiscreteMeasure lam({{-1, 0.2}, {0, 0.5}, {1, 0.3}});
    const auto xi = random_rule(rng, spec, lam);
    const auto law = pushforward_law(xi);
    CHECK(std::abs(expected_time(xi) - (moment(law, 2, dx) - moment(lam, 2, dx))) <= 1e-9);
    CHECK(std::abs(mean(law) - mean(lam)) <= 1e-10);
    double total = 0.0;
    for (std::size_t s = 0; s < xi.graph().size(); ++s) total += xi.stopped(s);
    CHECK(std::abs(total - 1.0) <= 1e-10);
  }
}

TEST_CASE("flow conservation with features") {
  std::mt19937_64 rng(5);
  const auto spec = LatticeSpec::symmetric(6, 1.0, {true, true, true});
  const auto lam = DiscreteMeasure::dirac(0);
  const auto xi = random_rule(rng, spec, lam);
  const auto& g = xi.graph();
  for (std::size_t s = 0; s < g.size(); ++s) {
    if (g.state(s).k == 0) {
      CHECK(xi.arrival(s) == lam.weight(g.state(s).x));
      continue;
    }
    double in = 0.0;
    for (const auto& e : g.parents(s)) in += xi.continuing(e.target) * e.prob;
    CHECK(std::abs(in - xi.arrival(s)) <= 1e-12);
  }
}

TEST_CASE("survival matches a path-by-path product") {
  std::mt19937_64 rng(9);
  const auto spec = LatticeSpec::symmetric(7, 1.0, {true, false, false});
  const auto lam = DiscreteMeasure::dirac(0);
  const auto xi = random_rule(rng, spec, lam);
  const auto& g = xi.graph();
  std::vector<double> survived(g.size(), 0.0), total(g.size(), 0.0);
  std::function<void(std::vector<int>&, double, double)> walk =
      [&](std::vector<int>& prefix, double weight, double alive) {
        const auto s = g.index_of(path_prefix_state(spec, prefix));
        survived[s] += weight * alive;
        total[s] += weight;
        if (g.is_terminal(s)) return;
        const double next_alive = alive * (1.0 - xi.stop_prob(s));
        for (int d : {-1, 1}) {
          prefix.push_back(prefix.back() + d);
          walk(prefix, weight * 0.5, next_alive);
          prefix.pop_back();
        }
      };
  std::vector<int> prefix{0};
  walk(prefix, 1.0, 1.0);
  const auto h = xi.survival();
  for (std::size_t s = 0; s < g.size(); ++s) {
    CHECK(std::abs(h[s] - survived[s] / total[s]) <= 1e-12);
  }
}

TEST_CASE("json round trip") {
  const auto spec = LatticeSpec::symmetric(3, 1.0, {true, false, false});
  const auto lam = DiscreteMeasure::dirac(0);
  const auto xi = make(spec, lam, [](const AugmentedState& s) { return s.x == *s.max ? 0.25 : 0.0; });
  const nlohmann::json j = xi;
  CHECK(j.at("stop_prob").size() == xi.graph().size());
  CHECK(j.at("stop_prob")[0][0] == "0:0:0");
  const auto p = stop_prob_from_json(xi.graph(), j);
  for (std::size_t s = 0; s < p.size(); ++s) CHECK(p[s] == xi.stop_prob(s));

  auto missing = j;
  missing.at("stop_prob").erase(missing.at("stop_prob").begin());
  CHECK_THROWS_AS(stop_prob_from_json(xi.graph(), missing), InvalidArgument);
  auto unknown = j;
  unknown.at("stop_prob")[0][0] = "0:5:5";
  CHECK_THROWS_AS(stop_prob_from_json(xi.graph(), unknown), InvalidArgument);
}

TEST_CASE("cost needs tracked features") {
  const auto spec = LatticeSpec::symmetric(2);
  const auto xi = make(spec, DiscreteMeasure::dirac(0), at_time(1));
  const auto with_max = LatticeSpec::symmetric(2, 1.0, {true, false, false});
  CHECK_THROWS_AS(expected_cost(xi, azema_yor_cost(with_max)), FeatureError);
}
