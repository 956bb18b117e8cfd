#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "skembed/costs.hpp"
#include "skembed/error.hpp"
#include "skembed/lattice.hpp"
#include "skembed/measures.hpp"
#include "skembed/simplex.hpp"
#include "skembed/stopping.hpp"

namespace skembed {

/// Exact marginal constraint, or a total-variation budget epsilon on it.
struct SolveMode {
  bool soft = false;
  double epsilon = 0.0;

  static SolveMode exact() { return {}; }
  static SolveMode tv(double eps) { return {true, eps}; }
};

struct EmbeddingProblem {
  LatticeSpec spec;
  DiscreteMeasure start;
  DiscreteMeasure target;
  CostFunctional cost;
  SolveMode mode;
  bool secondary = false;

  /// Throws on hard violations (features, start support, Perkins start
  /// atom, epsilon range). Returns warnings such as a convex-order failure.
  std::vector<std::string> validate() const;
};

/// Dual solution of the embedding LP.
/// phi is indexed by state, psi by level (levels ascending, see `levels`).
struct DualCertificate {
  std::vector<int> levels;
  std::vector<double> psi;
  std::vector<double> phi;
  std::vector<double> slack;  // gamma - phi - psi(x) per state
  /// Multiplier of the total-variation row (soft mode only, <= 0).
  std::optional<double> tv_multiplier;
  double dual_objective = 0.0;

  double psi_at(int level) const;
};

struct OptimalSolution {
  std::shared_ptr<const StateGraph> graph;
  RandomizedStoppingTime xi;
  double objective = 0.0;
  std::optional<double> secondary_objective;
  std::optional<DualCertificate> certificate;
  double gap = 0.0;
  double tv_deviation = 0.0;  // TV distance of the embedded law to the target
  std::size_t iterations = 0;
};

class InfeasibleError : public Error {
 public:
  InfeasibleError(std::string hint, std::vector<double> farkas, bool verified)
      : Error("embedding problem is infeasible: " + hint),
        hint_(std::move(hint)), farkas_(std::move(farkas)), verified_(verified) {}
  const std::string& hint() const { return hint_; }
  const std::vector<double>& farkas() const { return farkas_; }
  bool verified() const { return verified_; }

 private:
  std::string hint_;
  std::vector<double> farkas_;
  bool verified_;
};

/// Where each LP column and row of the embedding problem lives.
struct LPLayout {
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::vector<std::size_t> stop_col;      // per state
  std::vector<std::size_t> continue_col;  // per state; npos at the horizon
  std::vector<std::size_t> flow_row;      // per state
  std::vector<int> marginal_levels;       // ascending
  std::vector<std::size_t> marginal_row;  // parallel to marginal_levels
  std::vector<std::size_t> excess_col, deficit_col;  // soft mode, per marginal level
  std::size_t tv_row = npos, tv_slack_col = npos;
};

/// Variables: stopped mass per state, continuing mass per non-terminal state
/// (plus slacks in soft mode). Rows: one flow balance per state, one marginal
/// per target level (every reachable level in soft mode), and the TV budget.
/// In exact mode stopping at a level outside the target support is fixed to 0.
StandardFormLP assemble_lp(const EmbeddingProblem& problem, const StateGraph& graph,
                           LPLayout* layout = nullptr);

/// Solves the problem (and the secondary problem when requested). Throws
/// InfeasibleError when the LP has no feasible point.
OptimalSolution solve(const EmbeddingProblem& problem, const SimplexOptions& options = {});

struct CertificateReport {
  bool ok = true;
  std::vector<std::string> failures;
  double primal = 0.0;
  double dual = 0.0;
  double gap = 0.0;
  double worst_slack = 0.0;       // most negative slack
  double worst_martingale = 0.0;  // largest violation of the martingale rules
};

/// Re-verifies the certificate stored in `sol` from scratch.
CertificateReport certificate_check(const OptimalSolution& sol,
                                    const EmbeddingProblem& problem, double tol = 1e-8);

/// Same checks against an explicit certificate.
CertificateReport certificate_check(const RandomizedStoppingTime& xi,
                                    const DualCertificate& cert,
                                    const EmbeddingProblem& problem, double tol = 1e-8);

/// Optimum over all path-dependent randomized stopping times, by an LP on the
/// full tree of path prefixes.
struct PathTreeResult {
  double objective = 0.0;
  std::optional<double> secondary_objective;
  DiscreteMeasure law;
  std::size_t nodes = 0;
};
inline constexpr int kMaxOracleSteps = 12;
PathTreeResult solve_pathtree_oracle(const EmbeddingProblem& problem,
                                     const SimplexOptions& options = {});

struct Violation {
  std::size_t going;
  std::size_t stopped;
};

/// Stop-go pairs (going state with continuing mass, stopped state with stopped
/// mass) for the cost's ordering.
///
/// With `horizon_aware` a pair only counts when the swap is realizable before
/// the horizon: the going state's remaining run under `xi`, grafted onto the
/// stopped state, must end by time N. Without it every ordered pair counts.
std::vector<Violation> verify_monotonicity(const RandomizedStoppingTime& xi,
                                           const CostFunctional& cost, double tol = 1e-9,
                                           bool horizon_aware = true);

/// Latest time index at which mass arriving at each state can still be
/// stopped under `xi` (-1 where nothing is stopped downstream).
std::vector<int> latest_stop_time(const RandomizedStoppingTime& xi, double tol = 1e-9);

/// Joint law of (start level, stopped level).
struct Coupling {
  std::vector<int> start_levels;
  std::vector<int> end_levels;
  std::vector<std::vector<double>> mass;  // [start][end]
};
Coupling induced_coupling(const RandomizedStoppingTime& xi);

struct FeasibilityReport {
  bool feasible = false;
  std::string reason;
  std::vector<double> farkas;
};
FeasibilityReport feasibility_check(const EmbeddingProblem& problem,
                                    const SimplexOptions& options = {});

}  // namespace skembed
