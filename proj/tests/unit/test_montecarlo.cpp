#include <doctest.h>

#include <cmath>
#include <functional>

#include <nlohmann/json.hpp>

#include "skembed/error.hpp"
#include "skembed/montecarlo.hpp"

using namespace skembed;

namespace {

RandomizedStoppingTime rule(const LatticeSpec& spec, const DiscreteMeasure& lam,
                            const std::function<double(const AugmentedState&)>& p) {
  auto g = std::make_shared<const StateGraph>(enumerate_reachable(spec, lam));
  std::vector<double> v(g->size());
  for (std::size_t s = 0; s < g->size(); ++s) v[s] = g->is_terminal(s) ? 1.0 : p(g->state(s));
  return from_stop_probabilities(g, lam, v);
}

std::function<double(const AugmentedState&)> at_time(int k) {
  return [k](const AugmentedState& s) { return s.k == k ? 1.0 : 0.0; };
}

const DiscreteMeasure kThreePoint({{-2, 0.25}, {0, 0.5}, {2, 0.25}});

}  // namespace

TEST_CASE("sampled paths") {
  const auto spec = LatticeSpec::symmetric(3);
  const auto lam = DiscreteMeasure::dirac(0);
  const auto tau1 = rule(spec, lam, at_time(1));
  const auto four = sample_paths(tau1, 4, 42);
  REQUIRE(four.size() == 4);
  for (const auto& s : four) {
    CHECK(s.k == 1);
    CHECK(std::abs(s.x) == 1);
  }
  for (const auto& s : sample_paths(rule(spec, lam, at_time(0)), 50, 1)) {
    CHECK(s.k == 0);
    CHECK(s.x == 0);
  }
  // Later blocks of the stream reproduce the same samples.
  const auto all = sample_paths(tau1, 20, 9);
  const auto tail = sample_paths(tau1, 10, 9, 10);
  for (std::size_t i = 0; i < 10; ++i) CHECK(all[10 + i].x == tail[i].x);
  CHECK_THROWS_AS(sample_paths(tau1, 0, 1), InvalidArgument);
}

TEST_CASE("frequencies of the two-step rule") {
  const auto spec = LatticeSpec::symmetric(4);
  const auto xi = rule(spec, DiscreteMeasure::dirac(0), at_time(2));
  const auto counts = stopped_counts(xi, 100000, 2024);
  const auto& g = xi.graph();
  for (int x : {-2, 0, 2}) {
    const double f = counts[g.index_of({2, x, std::nullopt, std::nullopt, std::nullopt})] / 1e5;
    CHECK(std::abs(f - kThreePoint.weight(x)) <= 0.005);
  }
}

TEST_CASE("embedding verification") {
  const auto spec = LatticeSpec::symmetric(4);
  const auto lam = DiscreteMeasure::dirac(0);
  const auto pass = verify_embedding(rule(spec, lam, at_time(2)), kThreePoint, 100000, 7);
  CHECK(pass.passed);
  CHECK(pass.kolmogorov <= 0.01);
  CHECK(pass.tolerance == 0.01);
  CHECK(pass.seed == 7);

  const auto fail = verify_embedding(rule(spec, lam, at_time(1)), lam, 100000, 7);
  CHECK_FALSE(fail.passed);
  CHECK(std::abs(fail.kolmogorov - 0.5) <= dkw_tolerance(100000));

  const auto one = verify_embedding(rule(spec, lam, at_time(0)), lam, 1, 3);
  CHECK(one.passed);
  CHECK(one.kolmogorov == 0.0);

  CHECK(dkw_tolerance(100) == doctest::Approx(std::sqrt(std::log(2000.0) / 200.0)));
  CHECK(dkw_tolerance(100000000) == 0.01);
  CHECK_THROWS_AS(dkw_tolerance(10, 1.0), InvalidArgument);
}

TEST_CASE("cost estimates") {
  const auto spec = LatticeSpec::symmetric(4, 1.0, {true, false, false});
  const auto lam = DiscreteMeasure::dirac(0);
  const auto two = estimate_cost(rule(spec, lam, at_time(2)), root_cost(spec), 5000, 1);
  CHECK(two.mean == 4.0);
  CHECK(two.half_width == 0.0);

  const auto tau1 = rule(spec, lam, at_time(1));
  const auto ay = estimate_cost(tau1, azema_yor_cost(spec), 100000, 5);
  CHECK(std::abs(ay.mean + 0.5) <= 4 * ay.half_width);
  CHECK(std::abs(ay.mean - expected_cost(tau1, azema_yor_cost(spec))) <= 4 * ay.half_width);

  const auto start = estimate_cost(rule(spec, lam, at_time(0)), azema_yor_cost(spec), 10, 1);
  CHECK(start.mean == 0.0);

  const auto plain = LatticeSpec::symmetric(4);
  CHECK_THROWS_AS(estimate_cost(rule(plain, lam, at_time(1)), azema_yor_cost(spec), 10, 1),
                  FeatureError);
}

TEST_CASE("reports do not depend on the worker count") {
  const auto spec = LatticeSpec::symmetric(6);
  const DiscreteMeasure lam({{-1, 0.3}, {0, 0.4}, {1, 0.3}});
  auto s6 = spec;
  s6.start_support = {-1, 0, 1};
  const auto xi = rule(s6, lam, [](const AugmentedState& s) { return s.x == 0 ? 0.3 : 0.1; });
  const auto law = pushforward_law(xi);
  const nlohmann::json base = verify_embedding(xi, law, 30001, 77, std::nullopt, 1, nullptr);
  for (unsigned w : {2u, 8u}) {
    const auto r = verify_embedding(xi, law, 30001, 77, std::nullopt, w, nullptr);
    nlohmann::json j = r;
    j["workers"] = 1;
    CHECK(j == base);
    CHECK(stopped_counts(xi, 30001, 77, w) == stopped_counts(xi, 30001, 77, 1));
  }
  CHECK(nlohmann::json(verify_embedding(xi, law, 30001, 77)) == base);
}
