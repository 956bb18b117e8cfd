#pragma once

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <string_view>
#include <vector>

namespace skembed {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// All solver tolerances in one place.
struct SimplexOptions {
  double feasibility = 1e-9;   // primal residuals and bound violations
  double optimality = 1e-9;    // reduced-cost sign test
  double face_width = 1e-9;    // lexicographic face: c x in [opt - width, opt]
  double pivot = 1e-11;        // smallest admissible pivot element
  int refactor_interval = 64;  // eta updates between fresh factorizations
  int stall_threshold = 50;    // non-improving pivots before Bland's rule
  std::size_t max_iterations = 5'000'000;
};

struct Triplet {
  std::size_t row = 0;
  std::size_t col = 0;
  double value = 0.0;
};

/// min c x  s.t.  A x = b,  0 <= x <= upper.
class StandardFormLP {
 public:
  std::size_t add_variable(double cost, double upper = kInfinity);
  std::size_t add_row(double rhs);
  /// Duplicate (row, col) entries are summed by finalize().
  void add_entry(std::size_t row, std::size_t col, double value);

  std::size_t rows() const { return b_.size(); }
  std::size_t cols() const { return c_.size(); }
  const std::vector<double>& rhs() const { return b_; }
  const std::vector<double>& cost() const { return c_; }
  const std::vector<double>& upper() const { return upper_; }
  void set_cost(std::size_t col, double value) { c_.at(col) = value; }
  void set_rhs(std::size_t row, double value) { b_.at(row) = value; }

  /// Merges duplicates, drops zeros, validates indices and finiteness, and
  /// sorts entries by (col, row). Called by the solvers; idempotent.
  void finalize();
  const std::vector<Triplet>& entries() const { return entries_; }

  /// A^T y, one entry per column.
  std::vector<double> transpose_times(const std::vector<double>& y) const;
  /// A x, one entry per row.
  std::vector<double> times(const std::vector<double>& x) const;

  /// Human-readable listing in the spirit of MPS, for debugging.
  void dump(std::ostream& out) const;

 private:
  std::vector<double> b_;
  std::vector<double> c_;
  std::vector<double> upper_;
  std::vector<Triplet> entries_;
  bool finalized_ = true;
};

enum class LPStatus { Optimal, Infeasible, Unbounded, IterationLimit };
std::string_view to_string(LPStatus status);

struct LPSolution {
  LPStatus status = LPStatus::IterationLimit;
  std::vector<double> x;
  std::vector<double> duals;          // one per row
  std::vector<double> reduced_costs;  // c - A^T y
  double objective = 0.0;
  /// Infeasible only: y with y b - sum_j u_j max(0, (A^T y)_j) > 0 and
  /// (A^T y)_j <= 0 on every column without a finite upper bound.
  std::vector<double> farkas;
  std::size_t iterations = 0;
  /// Optimal only: basic column per row (artificial of row i numbered
  /// cols() + i) and the nonbasic columns sitting at their upper bound.
  std::vector<std::size_t> basis;
  std::vector<std::size_t> at_upper;
};

/// Two-phase bounded revised simplex on a sparse LU basis factorization.
LPSolution solve(StandardFormLP lp, const SimplexOptions& options = {});

/// Minimizes `secondary` over the optimal face of `lp`. The returned
/// objective is the secondary one; `duals` belong to the primary rows of the
/// face-constrained problem.
LPSolution solve_lexicographic(StandardFormLP lp, const std::vector<double>& secondary,
                               const SimplexOptions& options = {});

/// As above, reusing an optimal solution `first` of `lp` for the face and, when
/// it carries a basis, as the starting basis of the secondary solve.
LPSolution solve_lexicographic(StandardFormLP lp, const std::vector<double>& secondary,
                               const LPSolution& first, const SimplexOptions& options = {});

/// Dense tableau simplex with Bland's rule. Slow; a cross-check for small
/// instances (at most 2000 columns).
LPSolution solve_dense(StandardFormLP lp, const SimplexOptions& options = {});

/// Checks an infeasibility certificate against the LP data.
bool verify_farkas(const StandardFormLP& lp, const std::vector<double>& y,
                   double tol = 1e-9);

/// Largest |A x - b| and largest bound violation.
double primal_residual(const StandardFormLP& lp, const std::vector<double>& x);

}  // namespace skembed
