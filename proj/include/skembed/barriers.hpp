#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "skembed/costs.hpp"
#include "skembed/error.hpp"
#include "skembed/lattice.hpp"
#include "skembed/measures.hpp"
#include "skembed/optsep.hpp"
#include "skembed/stopping.hpp"

namespace skembed {

/// A generating cell of the stopping region: a point of the phase space on one
/// level. Every state on the same level that dominates the cell under the
/// cost's order lies strictly inside the region.
struct BarrierCell {
  int level = 0;
  std::vector<int> coords;  // phase point, as CostFunctional::phase_point
  double fraction = 1.0;    // stop probability on entering the cell

  friend bool operator==(const BarrierCell&, const BarrierCell&) = default;
};

/// Explicit stop probability for one state, overriding the region rule.
struct StopOverride {
  enum class Reason { Boundary, Horizon };
  AugmentedState state;
  double p = 0.0;
  Reason reason = Reason::Boundary;
};

/// Stopping region in the cost's phase space, stored as per-level threshold
/// cells (the closed barrier) plus per-state overrides.
///
/// Overrides carry the stop probabilities of reached boundary states whose
/// probability differs from the cell fraction, and of stops that only the
/// finite horizon explains (no swap with a going state fits before time N).
class PhaseBarrier {
 public:
  PhaseBarrier(CostFunctional cost, const LatticeSpec& spec, std::vector<BarrierCell> cells,
               std::vector<StopOverride> overrides = {});

  const CostFunctional& cost() const { return cost_; }
  Phase phase() const { return cost_.phase; }
  BarrierKind kind() const { return cost_.kind; }
  int pivot() const { return cost_.pivot; }
  int steps() const { return steps_; }
  double step_size() const { return step_size_; }
  double time_step() const { return time_step_; }
  const std::vector<BarrierCell>& cells() const { return cells_; }
  const std::vector<StopOverride>& overrides() const { return overrides_; }

  bool empty() const { return cells_.empty(); }
  /// Cells on one level, in coordinate order.
  std::vector<BarrierCell> cells_at(int level) const;

  /// In the closed region: on a cell or strictly beyond one.
  bool contains(const AugmentedState& s) const;
  /// Strictly beyond some cell of the same level.
  bool interior(const AugmentedState& s) const;
  /// The cell `s` sits on, if any.
  const BarrierCell* cell_of(const AugmentedState& s) const;

  /// One-coordinate phases: the threshold coordinate on `level` (nullopt if the
  /// level has no cell). For cave barriers `post` selects the barrier part.
  std::optional<int> threshold(int level, bool post = false) const;

  /// Region rule for one state, before the horizon is forced.
  double stop_probability(const AugmentedState& s) const;

 private:
  CostFunctional cost_;
  int steps_ = 0;
  double step_size_ = 1.0;
  double time_step_ = 1.0;
  std::vector<BarrierCell> cells_;
  std::vector<StopOverride> overrides_;
  std::map<AugmentedState, double> override_p_;
};

class BarrierKindError : public Error {
 public:
  BarrierKindError(int level, std::string detail)
      : Error("barrier shape violated at level " + std::to_string(level) + ": " + detail),
        level_(level) {}
  int level() const { return level_; }

 private:
  int level_;
};

/// A state-independent witness of a phase point, used to test the cost's
/// order against cells.
AugmentedState cell_state(Phase phase, int level, const std::vector<int>& coords);

/// Reads the barrier off the support of an optimizer. Stops whose every
/// dominating going state could not be swapped before the horizon become
/// Horizon overrides; any other stop that a going state dominates is a shape
/// violation and throws BarrierKindError, as does a failed threshold check.
PhaseBarrier extract_barrier(const OptimalSolution& sol, const EmbeddingProblem& problem,
                             double tol = 1e-10);
PhaseBarrier extract_barrier(const RandomizedStoppingTime& xi, const CostFunctional& cost,
                             double tol = 1e-10);

struct ThresholdFailure {
  int level = 0;
  std::string what;
};

/// Grid checks of the threshold shape per kind: a single threshold per level
/// and completeness in time for (t,x) barriers, and monotone derived
/// threshold functions for the other phases. Perkins cells must sit at a
/// running extreme.
std::vector<ThresholdFailure> check_thresholds(const PhaseBarrier& b);

/// Largest number of fractional boundary entries on any level.
int max_fractions_per_level(const PhaseBarrier& b, double tol = 1e-6);

/// Hitting time of the barrier as a Markov rule on the lattice of `spec`.
/// FeatureError if `spec` lacks a feature the phase needs.
RandomizedStoppingTime hitting_rst(const PhaseBarrier& b, const LatticeSpec& spec,
                                   const DiscreteMeasure& lambda);

/// Largest per-state difference of the stopped masses of two rules.
double stopped_law_distance(const RandomizedStoppingTime& a, const RandomizedStoppingTime& b);

/// True iff both hitting rules stop the same mass at every state (<= tol).
/// InvalidArgument on a phase or kind mismatch.
bool loynes_compare(const PhaseBarrier& b1, const PhaseBarrier& b2, const LatticeSpec& spec,
                    const DiscreteMeasure& lambda, double tol = 1e-9);

/// (t,x) barrier or inverse barrier with time reversed, k -> N - k.
PhaseBarrier reverse_time(const PhaseBarrier& b);

/// Header plus one row per cell, level ascending:
/// phase,level,threshold,value,fraction (and region for cave barriers).
std::string export_barrier_csv(const PhaseBarrier& b);
void to_json(nlohmann::json& j, const PhaseBarrier& b);

}  // namespace skembed
