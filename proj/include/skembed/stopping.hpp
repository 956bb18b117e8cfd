#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "skembed/lattice.hpp"
#include "skembed/measures.hpp"

namespace skembed {

struct CostFunctional;

/// Markovian randomized stopping time on a state graph.
///
/// `stop_prob(s)` is the probability of stopping on arrival at `s` given the
/// walk has not stopped before. Arrival and stopped masses are derived by a
/// forward pass in time order and are exact up to floating-point rounding.
class RandomizedStoppingTime {
 public:
  RandomizedStoppingTime(std::shared_ptr<const StateGraph> graph,
                         DiscreteMeasure start, std::vector<double> stop_prob);

  const StateGraph& graph() const { return *graph_; }
  std::shared_ptr<const StateGraph> graph_ptr() const { return graph_; }
  const DiscreteMeasure& start() const { return start_; }

  std::span<const double> stop_prob() const { return stop_prob_; }
  std::span<const double> arrival() const { return arrival_; }
  std::span<const double> stopped() const { return stopped_; }

  double stop_prob(std::size_t s) const { return stop_prob_[s]; }
  double arrival(std::size_t s) const { return arrival_[s]; }
  double stopped(std::size_t s) const { return stopped_[s]; }
  double continuing(std::size_t s) const { return arrival_[s] - stopped_[s]; }

  /// Survival on arrival: the share of the free-walk mass reaching `s` that
  /// has not been stopped earlier. Equal to 1 at start states.
  std::vector<double> survival() const;

 private:
  std::shared_ptr<const StateGraph> graph_;
  DiscreteMeasure start_;
  std::vector<double> stop_prob_;
  std::vector<double> arrival_;
  std::vector<double> stopped_;
};

/// Validates `p` (one entry per state, within [0,1], equal to 1 at the horizon)
/// and builds the stopping time.
RandomizedStoppingTime from_stop_probabilities(
    std::shared_ptr<const StateGraph> graph, const DiscreteMeasure& lambda,
    std::vector<double> p);

/// Arrival masses of the walk that never stops (except at the horizon).
std::vector<double> free_arrival(const StateGraph& graph,
                                 const DiscreteMeasure& lambda);

/// Law of the position at the stopping time.
DiscreteMeasure pushforward_law(const RandomizedStoppingTime& xi);

/// Law of the position when stopping at the earlier of the rule and time k.
DiscreteMeasure stopped_law_at(const RandomizedStoppingTime& xi, int k);

/// E[tau] in physical time.
double expected_time(const RandomizedStoppingTime& xi);

/// E[gamma(stopped state)]; FeatureError if the cost needs untracked features.
double expected_cost(const RandomizedStoppingTime& xi, const CostFunctional& cost);

/// Rule restarted at `s` (relative time 0) with unit mass there. The walk
/// keeps the features accumulated up to `s`. When no surviving mass reaches
/// `s` the rule stops instantly.
RandomizedStoppingTime conditional(const RandomizedStoppingTime& xi,
                                   const AugmentedState& s);

/// {"stop_prob": [[key, p], ...]} in state order.
void to_json(nlohmann::json& j, const RandomizedStoppingTime& xi);

/// Reads {"stop_prob": [[key, p], ...]}. Every state of the graph must be
/// listed exactly once; unknown keys are rejected.
std::vector<double> stop_prob_from_json(const StateGraph& graph,
                                        const nlohmann::json& j);

}  // namespace skembed
