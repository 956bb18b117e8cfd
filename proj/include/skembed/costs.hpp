#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "skembed/lattice.hpp"

namespace skembed {

/// Real function of one variable drawn from a small fixed grammar:
///   "t", "t^2", "t^3", "sqrt", "exp-decay" (e^-t), "saturating" (1 - 2^(-t-1)),
///   {"poly": [c0, c1, ...]}, {"piecewise-cave": t0}, {"table": [...], "unit": u}.
class ScalarFunction {
 public:
  ScalarFunction() : ScalarFunction("t") {}
  explicit ScalarFunction(std::string name);

  static ScalarFunction poly(std::vector<double> coeffs);
  /// t/t0 (2 - t/t0) on [0, t0], exp(-(t - t0)) after.
  static ScalarFunction piecewise_cave(double t0);
  /// Values at arguments 0, unit, 2 unit, ...
  static ScalarFunction table(std::vector<double> values, double unit = 1.0);

  double operator()(double t) const;
  const std::string& name() const { return name_; }

  nlohmann::json to_json() const;
  static ScalarFunction from_json(const nlohmann::json& j);

 private:
  std::string name_;
  std::vector<double> params_;
  double unit_ = 1.0;
};

/// Coordinates in which an embedding's stopping region is barrier-shaped.
enum class Phase {
  TimeSpace,     ///< (t, x)
  MaxSpace,      ///< (max, x)
  AbsMaxSpace,   ///< (|x|*, x)
  LocalTimeSpace,///< (L, x)
  MaxMin,        ///< (max, min)
  MinMaxSpace,   ///< (min, max, x)
};

enum class BarrierKind {
  Barrier,
  Inverse,
  Cave,
  ThresholdIncreasing,
  ThresholdDecreasing,
  TwoSided,
};

std::string_view to_string(Phase phase);
std::string_view to_string(BarrierKind kind);

using StateFunction = std::function<double(const AugmentedState&, const LatticeSpec&)>;
using StatePredicate = std::function<bool(const AugmentedState&, const AugmentedState&)>;

/// A cost to minimize over embeddings, with the geometry the optimizer is
/// expected to have.
struct CostFunctional {
  std::string name;
  TrackedFeatures required;
  Phase phase = Phase::TimeSpace;
  BarrierKind kind = BarrierKind::Barrier;
  int pivot = -1;  // cave pivot time index
  StateFunction primary;
  StateFunction secondary;  // empty when no secondary problem applies
  /// Ordering half of the stop-go predicate: going state `a` is worse off than
  /// stopped state `b` at the same level. Position equality is checked by
  /// sg_pair, not here.
  StatePredicate dominates;
  nlohmann::json params;

  bool has_secondary() const { return static_cast<bool>(secondary); }

  /// Primary cost at a state; FeatureError if the state lacks a feature.
  double evaluate(const AugmentedState& s, const LatticeSpec& spec) const;
  double evaluate_secondary(const AugmentedState& s, const LatticeSpec& spec) const;

  /// Throws FeatureError naming the first required feature `spec` lacks.
  void check_features(const LatticeSpec& spec) const;

  /// Coordinates of `s` in the cost's phase space (excluding the level).
  std::vector<int> phase_point(const AugmentedState& s) const;
};

/// True iff (going, stopped) is a stop-go pair for `cost`: equal levels and
/// the cost's ordering predicate holds.
bool sg_pair(const CostFunctional& cost, const AugmentedState& going,
             const AugmentedState& stopped);

/// E[h(tau)] with h convex; stop-go pairs: same level, going later.
CostFunctional root_cost(const LatticeSpec& spec,
                         ScalarFunction h = ScalarFunction("t^2"));
/// E[h(tau)] with h concave; stop-go pairs: same level, going earlier.
CostFunctional rost_cost(const LatticeSpec& spec,
                         ScalarFunction h = ScalarFunction("sqrt"));
/// E[phi(tau)] with phi concave before the pivot and convex after it.
/// The default phi is piecewise_cave(pivot time).
CostFunctional cave_cost(const LatticeSpec& spec, int pivot_index,
                         std::optional<ScalarFunction> phi = std::nullopt);
/// Maximize E[max]; secondary phi(max) x^2 with phi(m) = 1 - 2^(-m-1).
CostFunctional azema_yor_cost(const LatticeSpec& spec);
/// Maximize E[phi(|B|*)]; secondary as Azema-Yor with |x|* for the maximum.
CostFunctional jacka_cost(const LatticeSpec& spec,
                          ScalarFunction phi = ScalarFunction("t"));
/// Minimize E[phi(max) + phi(-min)]; secondary -x^2 (w(max) + w(-min)).
CostFunctional perkins_cost(const LatticeSpec& spec,
                            ScalarFunction phi = ScalarFunction("t"),
                            ScalarFunction weight = ScalarFunction("saturating"));
/// Maximize E[phi(max) + phi(-min)]; secondary x^2 (w(max) + w(-min)).
CostFunctional range_cost(const LatticeSpec& spec,
                          ScalarFunction phi = ScalarFunction("t"),
                          ScalarFunction weight = ScalarFunction("saturating"));

enum class Direction { Minimize, Maximize };

/// Minimize or maximize E[h(L)], L the number of visits to 0 (physical
/// L * step_size). h must be strictly convex or strictly concave on the grid.
CostFunctional vallois_cost(const LatticeSpec& spec,
                            ScalarFunction h = ScalarFunction("sqrt"),
                            Direction direction = Direction::Minimize);

/// Names accepted by cost_from_json, one per embedding in the catalog.
std::vector<std::string> catalog_names();

/// Builds a cost from {"name": ..., parameters...}.
CostFunctional cost_from_json(const nlohmann::json& j, const LatticeSpec& spec);

}  // namespace skembed
