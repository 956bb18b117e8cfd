#include "skembed/stopping.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <nlohmann/json.hpp>

#include "skembed/costs.hpp"
#include "skembed/error.hpp"

namespace skembed {

namespace {

constexpr double kProbTolerance = 1e-12;

// Arrival masses under stop probabilities p; states are stored in time order
// so a single sweep suffices.
std::vector<double> forward_pass(const StateGraph& g, const DiscreteMeasure& lambda,
                                 std::span<const double> p) {
  std::vector<double> a(g.size(), 0.0);
  for (std::size_t r : g.roots()) a[r] = lambda.weight(g.state(r).x);
  for (std::size_t s = 0; s < g.size(); ++s) {
    const double go = a[s] * (1.0 - p[s]);
    if (go == 0.0) continue;
    for (const auto& e : g.children(s)) a[e.target] += go * e.prob;
  }
  return a;
}

}  // namespace

RandomizedStoppingTime::RandomizedStoppingTime(
    std::shared_ptr<const StateGraph> graph, DiscreteMeasure start,
    std::vector<double> stop_prob)
    : graph_(std::move(graph)), start_(std::move(start)), stop_prob_(std::move(stop_prob)) {
  if (!graph_) throw InvalidArgument("stopping time needs a state graph");
  if (stop_prob_.size() != graph_->size()) {
    throw InvalidArgument("stop probabilities do not match the state count");
  }
  arrival_ = forward_pass(*graph_, start_, stop_prob_);
  stopped_.resize(arrival_.size());
  for (std::size_t s = 0; s < arrival_.size(); ++s) {
    stopped_[s] = arrival_[s] * stop_prob_[s];
  }
}

std::vector<double> RandomizedStoppingTime::survival() const {
  const auto free = free_arrival(*graph_, start_);
  std::vector<double> h(free.size(), 0.0);
  for (std::size_t s = 0; s < free.size(); ++s) {
    if (free[s] > 0.0) h[s] = std::clamp(arrival_[s] / free[s], 0.0, 1.0);
  }
  return h;
}

RandomizedStoppingTime from_stop_probabilities(std::shared_ptr<const StateGraph> graph,
                                               const DiscreteMeasure& lambda,
                                               std::vector<double> p) {
  if (!graph) throw InvalidArgument("stopping time needs a state graph");
  if (p.size() != graph->size()) {
    throw InvalidArgument("expected " + std::to_string(graph->size()) +
                          " stop probabilities, got " + std::to_string(p.size()));
  }
  for (std::size_t s = 0; s < p.size(); ++s) {
    if (!(p[s] >= -kProbTolerance && p[s] <= 1.0 + kProbTolerance)) {
      throw InvalidArgument("stop probability at " + state_key(graph->state(s)) +
                            " outside [0,1]");
    }
    p[s] = std::clamp(p[s], 0.0, 1.0);
    if (graph->is_terminal(s)) {
      if (p[s] < 1.0 - kProbTolerance) {
        throw InvalidArgument("stop probability at horizon state " +
                              state_key(graph->state(s)) + " must be 1");
      }
      p[s] = 1.0;
    }
  }
  for (const auto& a : lambda.atoms()) {
    if (!graph->find(start_state(graph->spec(), a.index))) {
      throw InvalidArgument("starting level " + std::to_string(a.index) +
                            " is not a root of the graph");
    }
  }
  return RandomizedStoppingTime(std::move(graph), lambda, std::move(p));
}

std::vector<double> free_arrival(const StateGraph& graph, const DiscreteMeasure& lambda) {
  std::vector<double> p(graph.size(), 0.0);
  for (std::size_t s = 0; s < graph.size(); ++s) {
    if (graph.is_terminal(s)) p[s] = 1.0;
  }
  return forward_pass(graph, lambda, p);
}

DiscreteMeasure pushforward_law(const RandomizedStoppingTime& xi) {
  std::map<int, double> law;
  const auto& g = xi.graph();
  for (std::size_t s = 0; s < g.size(); ++s) {
    if (xi.stopped(s) > 0.0) law[g.state(s).x] += xi.stopped(s);
  }
  std::vector<Atom> atoms;
  for (const auto& [x, w] : law) atoms.push_back({x, w});
  return DiscreteMeasure::from_masses(std::move(atoms));
}

DiscreteMeasure stopped_law_at(const RandomizedStoppingTime& xi, int k) {
  const auto& g = xi.graph();
  if (k < 0 || k > g.spec().steps) throw InvalidArgument("time index outside [0, N]");
  std::map<int, double> law;
  const auto [lo, hi] = g.layer(k);
  for (std::size_t s = 0; s < hi; ++s) {
    const double m = s < lo ? xi.stopped(s) : xi.arrival(s);
    if (m > 0.0) law[g.state(s).x] += m;
  }
  std::vector<Atom> atoms;
  for (const auto& [x, w] : law) atoms.push_back({x, w});
  return DiscreteMeasure::from_masses(std::move(atoms));
}

double expected_time(const RandomizedStoppingTime& xi) {
  const auto& g = xi.graph();
  double acc = 0.0;
  for (std::size_t s = 0; s < g.size(); ++s) acc += xi.stopped(s) * g.state(s).k;
  return acc * g.spec().time_step;
}

double expected_cost(const RandomizedStoppingTime& xi, const CostFunctional& cost) {
  const auto& g = xi.graph();
  cost.check_features(g.spec());
  double acc = 0.0;
  for (std::size_t s = 0; s < g.size(); ++s) {
    if (xi.stopped(s) > 0.0) acc += xi.stopped(s) * cost.evaluate(g.state(s), g.spec());
  }
  return acc;
}

RandomizedStoppingTime conditional(const RandomizedStoppingTime& xi,
                                   const AugmentedState& s) {
  const auto& g = xi.graph();
  const std::size_t origin = g.index_of(s);

  LatticeSpec sub = g.spec();
  sub.steps = g.spec().steps - s.k;
  sub.start_support = {s.x};
  AugmentedState root = s;
  root.k = 0;
  auto graph = std::make_shared<const StateGraph>(StateGraph::build(sub, {root}));

  std::vector<double> p(graph->size(), 1.0);
  if (xi.arrival(origin) > 0.0) {
    for (std::size_t t = 0; t < graph->size(); ++t) {
      AugmentedState abs = graph->state(t);
      abs.k += s.k;
      p[t] = xi.stop_prob(g.index_of(abs));
    }
  }
  return RandomizedStoppingTime(std::move(graph), DiscreteMeasure::dirac(s.x), std::move(p));
}

void to_json(nlohmann::json& j, const RandomizedStoppingTime& xi) {
  auto rows = nlohmann::json::array();
  const auto& g = xi.graph();
  for (std::size_t s = 0; s < g.size(); ++s) {
    rows.push_back({state_key(g.state(s)), xi.stop_prob(s)});
  }
  j = nlohmann::json{{"stop_prob", std::move(rows)}};
}

std::vector<double> stop_prob_from_json(const StateGraph& graph, const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("stop_prob") || !j.at("stop_prob").is_array()) {
    throw InvalidArgument("expected {\"stop_prob\": [[key, p], ...]}");
  }
  std::vector<double> p(graph.size(), 0.0);
  std::vector<bool> seen(graph.size(), false);
  for (const auto& row : j.at("stop_prob")) {
    if (!row.is_array() || row.size() != 2 || !row[0].is_string() || !row[1].is_number()) {
      throw InvalidArgument("malformed stop_prob entry " + row.dump());
    }
    const auto state = parse_state_key(graph.spec(), row[0].get<std::string>());
    const auto idx = graph.find(state);
    if (!idx) throw InvalidArgument("unknown state '" + row[0].get<std::string>() + "'");
    if (seen[*idx]) throw InvalidArgument("duplicate state '" + row[0].get<std::string>() + "'");
    seen[*idx] = true;
    p[*idx] = row[1].get<double>();
  }
  for (std::size_t s = 0; s < graph.size(); ++s) {
    if (!seen[s]) throw InvalidArgument("missing state " + state_key(graph.state(s)));
  }
  return p;
}

}  // namespace skembed
