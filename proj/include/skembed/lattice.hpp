#pragma once

#include <compare>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "skembed/measures.hpp"

namespace skembed {

enum class Kernel {
  Symmetric,  ///< +1 / -1 with probability 1/2 each
  Drift,      ///< deterministic +1
  Custom,     ///< +1 with probability p_up, -1 otherwise
};

std::string_view to_string(Kernel kernel);
Kernel kernel_from_string(std::string_view name);

/// Path functionals carried along with (time, position).
struct TrackedFeatures {
  bool max = false;
  bool min = false;
  bool zero_visits = false;

  /// True if every feature set in `needed` is also set here.
  bool covers(const TrackedFeatures& needed) const {
    return (!needed.max || max) && (!needed.min || min) &&
           (!needed.zero_visits || zero_visits);
  }
  friend bool operator==(const TrackedFeatures&, const TrackedFeatures&) = default;
};

/// Discrete time-space grid on which the walk lives. All positions are integer
/// level indices; physical units are index * step_size and k * time_step.
struct LatticeSpec {
  int steps = 0;
  double step_size = 1.0;
  double time_step = 1.0;
  Kernel kernel = Kernel::Symmetric;
  double p_up = 0.5;  // used by Kernel::Custom only
  TrackedFeatures tracked;
  std::vector<int> start_support;

  /// Symmetric walk with Brownian scaling time_step = step_size^2.
  static LatticeSpec symmetric(int steps, double step_size = 1.0,
                               TrackedFeatures tracked = {},
                               std::vector<int> start_support = {0});

  /// Throws InvalidArgument on a bad horizon, step, probability or scaling.
  void validate() const;

  /// True when the position process is a martingale.
  bool is_martingale() const;
};

/// A lattice node: time index, level, and whichever path features are tracked.
/// `zero_visits` counts visits to level 0 at times strictly before `k`.
struct AugmentedState {
  int k = 0;
  int x = 0;
  std::optional<int> max;
  std::optional<int> min;
  std::optional<int> zero_visits;

  friend auto operator<=>(const AugmentedState&, const AugmentedState&) = default;
  friend bool operator==(const AugmentedState&, const AugmentedState&) = default;
};

/// Start state for a walk released at `x` at time 0.
AugmentedState start_state(const LatticeSpec& spec, int x);

/// Canonical key "k:x[:m][:i][:l]" (tracked features only, in that order).
std::string state_key(const AugmentedState& s);
AugmentedState parse_state_key(const LatticeSpec& spec, std::string_view key);

/// One branch of the kernel out of a state.
struct Transition {
  std::size_t target = 0;
  double prob = 0.0;
};

/// Kernel branches out of `s` with feature updates applied; empty at k = N.
/// Zero-probability branches are omitted.
std::vector<std::pair<AugmentedState, double>> child_states(
    const LatticeSpec& spec, const AugmentedState& s);

/// Augmented state of the endpoint of a lattice path given as the sequence of
/// visited level indices (prefix[0] is the start level).
AugmentedState path_prefix_state(const LatticeSpec& spec,
                                 std::span<const int> prefix);

/// Reachable states under free evolution, ordered by (k, x, features).
/// Immutable once built.
class StateGraph {
 public:
  static constexpr std::size_t kDefaultStateCap = 2'000'000;

  const LatticeSpec& spec() const { return spec_; }
  std::size_t size() const { return states_.size(); }
  std::span<const AugmentedState> states() const { return states_; }
  const AugmentedState& state(std::size_t s) const { return states_[s]; }

  std::span<const Transition> children(std::size_t s) const {
    return {child_edges_.data() + child_offsets_[s],
            child_offsets_[s + 1] - child_offsets_[s]};
  }
  std::span<const Transition> parents(std::size_t s) const {
    return {parent_edges_.data() + parent_offsets_[s],
            parent_offsets_[s + 1] - parent_offsets_[s]};
  }
  bool is_terminal(std::size_t s) const { return states_[s].k == spec_.steps; }

  /// States with k = 0.
  std::span<const std::size_t> roots() const { return roots_; }
  /// Index range [begin, end) of the states at time k.
  std::pair<std::size_t, std::size_t> layer(int k) const {
    return {layer_offsets_[k], layer_offsets_[k + 1]};
  }

  std::optional<std::size_t> find(const AugmentedState& s) const;
  /// Index of `s`; throws InvalidArgument if unreachable.
  std::size_t index_of(const AugmentedState& s) const;

  /// Distinct levels carried by any state, ascending.
  std::vector<int> levels() const;

  /// Builds the graph of every state reachable from the given roots (all at
  /// time 0). Throws ResourceError when the state count exceeds `state_cap`.
  static StateGraph build(const LatticeSpec& spec,
                          std::vector<AugmentedState> roots,
                          std::size_t state_cap = kDefaultStateCap);

 private:
  LatticeSpec spec_;
  std::vector<AugmentedState> states_;
  std::vector<std::size_t> child_offsets_;
  std::vector<Transition> child_edges_;
  std::vector<std::size_t> parent_offsets_;
  std::vector<Transition> parent_edges_;
  std::vector<std::size_t> roots_;
  std::vector<std::size_t> layer_offsets_;
};

/// Reachable-state graph for a walk started from `lambda`. Rejects a starting
/// law that is not carried by spec.start_support.
StateGraph enumerate_reachable(const LatticeSpec& spec,
                               const DiscreteMeasure& lambda,
                               std::size_t state_cap = StateGraph::kDefaultStateCap);

}  // namespace skembed
