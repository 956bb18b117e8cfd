#include "skembed/simplex.hpp"

#include <Eigen/Dense>
#include <Eigen/OrderingMethods>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "skembed/error.hpp"

namespace skembed {

std::size_t StandardFormLP::add_variable(double cost, double upper) {
  if (!std::isfinite(cost)) throw InvalidArgument("objective coefficient must be finite");
  if (!(upper >= 0.0)) throw InvalidArgument("upper bound must be non-negative");
  c_.push_back(cost);
  upper_.push_back(upper);
  return c_.size() - 1;
}

std::size_t StandardFormLP::add_row(double rhs) {
  if (!std::isfinite(rhs)) throw InvalidArgument("right-hand side must be finite");
  b_.push_back(rhs);
  return b_.size() - 1;
}

void StandardFormLP::add_entry(std::size_t row, std::size_t col, double value) {
  entries_.push_back({row, col, value});
  finalized_ = false;
}

void StandardFormLP::finalize() {
  if (finalized_) return;
  for (const auto& t : entries_) {
    if (t.row >= rows() || t.col >= cols()) {
      throw InvalidArgument("constraint entry references a missing row or column");
    }
    if (!std::isfinite(t.value)) throw InvalidArgument("constraint entry must be finite");
  }
  std::sort(entries_.begin(), entries_.end(), [](const Triplet& a, const Triplet& b) {
    return a.col != b.col ? a.col < b.col : a.row < b.row;
  });
  std::vector<Triplet> merged;
  for (const auto& t : entries_) {
    if (!merged.empty() && merged.back().row == t.row && merged.back().col == t.col) {
      merged.back().value += t.value;
    } else {
      merged.push_back(t);
    }
  }
  std::erase_if(merged, [](const Triplet& t) { return t.value == 0.0; });
  entries_ = std::move(merged);
  finalized_ = true;
}

std::vector<double> StandardFormLP::transpose_times(const std::vector<double>& y) const {
  std::vector<double> out(cols(), 0.0);
  for (const auto& t : entries_) out[t.col] += t.value * y[t.row];
  return out;
}

std::vector<double> StandardFormLP::times(const std::vector<double>& x) const {
  std::vector<double> out(rows(), 0.0);
  for (const auto& t : entries_) out[t.row] += t.value * x[t.col];
  return out;
}

void StandardFormLP::dump(std::ostream& out) const {
  out << "NAME lp\nROWS " << rows() << "\nCOLUMNS " << cols() << "\n";
  out << std::setprecision(17);
  for (const auto& t : entries_) {
    out << "  x" << t.col << " r" << t.row << " " << t.value << "\n";
  }
  out << "COST\n";
  for (std::size_t j = 0; j < cols(); ++j) {
    if (c_[j] != 0.0) out << "  x" << j << " " << c_[j] << "\n";
  }
  out << "RHS\n";
  for (std::size_t i = 0; i < rows(); ++i) out << "  r" << i << " " << b_[i] << "\n";
  out << "BOUNDS\n";
  for (std::size_t j = 0; j < cols(); ++j) {
    if (std::isfinite(upper_[j])) out << "  UP x" << j << " " << upper_[j] << "\n";
  }
  out << "ENDATA\n";
}

std::string_view to_string(LPStatus status) {
  switch (status) {
    case LPStatus::Optimal: return "optimal";
    case LPStatus::Infeasible: return "infeasible";
    case LPStatus::Unbounded: return "unbounded";
    case LPStatus::IterationLimit: return "iteration-limit";
  }
  return "?";
}

double primal_residual(const StandardFormLP& lp, const std::vector<double>& x) {
  double worst = 0.0;
  const auto ax = lp.times(x);
  for (std::size_t i = 0; i < lp.rows(); ++i) {
    worst = std::max(worst, std::abs(ax[i] - lp.rhs()[i]));
  }
  for (std::size_t j = 0; j < lp.cols(); ++j) {
    worst = std::max(worst, -x[j]);
    worst = std::max(worst, x[j] - lp.upper()[j]);
  }
  return worst;
}

bool verify_farkas(const StandardFormLP& lp, const std::vector<double>& y, double tol) {
  if (y.size() != lp.rows()) return false;
  const auto aty = lp.transpose_times(y);
  double value = 0.0;
  for (std::size_t i = 0; i < lp.rows(); ++i) value += y[i] * lp.rhs()[i];
  for (std::size_t j = 0; j < lp.cols(); ++j) {
    const double u = lp.upper()[j];
    if (std::isfinite(u)) {
      value -= u * std::max(0.0, aty[j]);
    } else if (aty[j] > tol) {
      return false;
    }
  }
  return value > tol;
}

namespace {

enum class VarState : unsigned char { Basic, Lower, Upper };

struct EtaFactor {
  std::size_t row;
  double pivot;
  std::vector<std::pair<std::size_t, double>> column;  // off-pivot nonzeros
};

using SparseMat = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

class RevisedSimplex {
 public:
  RevisedSimplex(const StandardFormLP& lp, const SimplexOptions& opt)
      : lp_(lp), opt_(opt), m_(lp.rows()), n_(lp.cols()), total_(n_ + m_) {
    sign_.assign(m_, 1.0);
    rhs_.resize(m_);
    for (std::size_t i = 0; i < m_; ++i) {
      if (lp.rhs()[i] < 0.0) sign_[i] = -1.0;
      rhs_[i] = sign_[i] * lp.rhs()[i];
    }
    col_start_.assign(n_ + 1, 0);
    for (const auto& t : lp.entries()) ++col_start_[t.col + 1];
    for (std::size_t j = 0; j < n_; ++j) col_start_[j + 1] += col_start_[j];
    row_idx_.resize(lp.entries().size());
    val_.resize(lp.entries().size());
    for (std::size_t e = 0; e < lp.entries().size(); ++e) {
      const auto& t = lp.entries()[e];
      row_idx_[e] = t.row;
      val_[e] = sign_[t.row] * t.value;
    }
    upper_.resize(total_);
    for (std::size_t j = 0; j < n_; ++j) upper_[j] = lp.upper()[j];
    for (std::size_t j = n_; j < total_; ++j) upper_[j] = kInfinity;

    state_.assign(total_, VarState::Lower);
    value_.assign(total_, 0.0);
    head_.resize(m_);
    for (std::size_t i = 0; i < m_; ++i) {
      head_[i] = n_ + i;
      state_[n_ + i] = VarState::Basic;
      value_[n_ + i] = rhs_[i];
    }
    cost_.assign(total_, 0.0);
  }

  /// Installs a starting basis. Returns false (leaving the engine untouched)
  /// when it is singular or not primal feasible.
  bool warm_start(const std::vector<std::size_t>& basis,
                  const std::vector<std::size_t>& at_upper) {
    if (basis.size() != m_) return false;
    const auto saved_head = head_;
    const auto saved_state = state_;
    const auto saved_value = value_;
    std::fill(state_.begin(), state_.end(), VarState::Lower);
    std::fill(value_.begin(), value_.end(), 0.0);
    for (std::size_t j : at_upper) {
      if (j >= n_ || !std::isfinite(upper_[j])) return restore(saved_head, saved_state, saved_value);
      state_[j] = VarState::Upper;
      value_[j] = upper_[j];
    }
    for (std::size_t r = 0; r < m_; ++r) {
      const std::size_t j = basis[r];
      if (j >= total_ || state_[j] == VarState::Basic) {
        return restore(saved_head, saved_state, saved_value);
      }
      head_[r] = j;
      state_[j] = VarState::Basic;
    }
    if (!try_refactor()) return restore(saved_head, saved_state, saved_value);
    for (std::size_t r = 0; r < m_; ++r) {
      const std::size_t j = head_[r];
      const double ub = j >= n_ ? 0.0 : upper_[j];
      if (value_[j] < -opt_.feasibility || value_[j] > ub + opt_.feasibility) {
        return restore(saved_head, saved_state, saved_value);
      }
    }
    warm_ = true;
    return true;
  }

  LPSolution run() {
    LPSolution sol;
    if (warm_) {
      for (std::size_t j = n_; j < total_; ++j) upper_[j] = 0.0;
      return finish_phase2(sol);
    }
    refactor();

    // Phase 1: minimize the sum of artificials.
    std::fill(cost_.begin(), cost_.end(), 0.0);
    for (std::size_t j = n_; j < total_; ++j) cost_[j] = 1.0;
    const auto p1 = iterate();
    sol.iterations = iterations_;
    if (p1 == LPStatus::IterationLimit) {
      sol.status = p1;
      return sol;
    }
    refactor();
    double infeasibility = 0.0;
    for (std::size_t j = n_; j < total_; ++j) infeasibility += value_[j];
    if (infeasibility > opt_.feasibility) {
      const auto y = btran_costs();
      sol.status = LPStatus::Infeasible;
      sol.farkas.resize(m_);
      for (std::size_t i = 0; i < m_; ++i) sol.farkas[i] = sign_[i] * y[i];
      return sol;
    }

    drive_out_artificials();
    for (std::size_t j = n_; j < total_; ++j) {
      upper_[j] = 0.0;
      if (state_[j] != VarState::Basic) {
        state_[j] = VarState::Lower;
        value_[j] = 0.0;
      }
    }
    return finish_phase2(sol);
  }

 private:
  LPSolution finish_phase2(LPSolution& sol) {
    for (std::size_t j = 0; j < n_; ++j) cost_[j] = lp_.cost()[j];
    for (std::size_t j = n_; j < total_; ++j) cost_[j] = 0.0;
    stalled_ = 0;
    bland_ = false;
    const auto p2 = iterate();
    sol.iterations = iterations_;
    sol.status = p2;
    if (p2 != LPStatus::Optimal) return sol;

    refactor();
    sol.x.assign(value_.begin(), value_.begin() + static_cast<long>(n_));
    for (std::size_t j = 0; j < n_; ++j) {
      if (std::abs(sol.x[j]) <= opt_.feasibility) sol.x[j] = std::max(sol.x[j], 0.0);
      if (std::isfinite(upper_[j]) && sol.x[j] > upper_[j]) sol.x[j] = upper_[j];
    }
    const auto y = btran_costs();
    sol.duals.resize(m_);
    for (std::size_t i = 0; i < m_; ++i) sol.duals[i] = sign_[i] * y[i];
    const auto aty = lp_.transpose_times(sol.duals);
    sol.reduced_costs.resize(n_);
    sol.objective = 0.0;
    for (std::size_t j = 0; j < n_; ++j) {
      sol.reduced_costs[j] = lp_.cost()[j] - aty[j];
      sol.objective += lp_.cost()[j] * sol.x[j];
    }
    sol.basis = head_;
    for (std::size_t j = 0; j < n_; ++j) {
      if (state_[j] == VarState::Upper) sol.at_upper.push_back(j);
    }
    return sol;
  }

  bool restore(const std::vector<std::size_t>& head, const std::vector<VarState>& state,
               const std::vector<double>& value) {
    head_ = head;
    state_ = state;
    value_ = value;
    refactor();
    return false;
  }

  template <typename F>
  void for_column(std::size_t j, F&& f) const {
    if (j >= n_) {
      f(j - n_, 1.0);
      return;
    }
    for (std::size_t e = col_start_[j]; e < col_start_[j + 1]; ++e) f(row_idx_[e], val_[e]);
  }

  double column_dot(std::size_t j, const Eigen::VectorXd& y) const {
    double acc = 0.0;
    for_column(j, [&](std::size_t i, double v) { acc += v * y[static_cast<long>(i)]; });
    return acc;
  }

  void refactor() {
    if (!try_refactor()) throw Error("simplex basis became singular during refactorization");
  }

  bool try_refactor() {
    std::vector<Eigen::Triplet<double>> trips;
    for (std::size_t r = 0; r < m_; ++r) {
      for_column(head_[r], [&](std::size_t i, double v) {
        trips.emplace_back(static_cast<int>(i), static_cast<int>(r), v);
      });
    }
    SparseMat basis(static_cast<long>(m_), static_cast<long>(m_));
    basis.setFromTriplets(trips.begin(), trips.end());
    basis.makeCompressed();
    lu_.analyzePattern(basis);
    lu_.factorize(basis);
    if (lu_.info() != Eigen::Success) return false;
    etas_.clear();

    // Recompute basic values from the nonbasic ones.
    Eigen::VectorXd r(static_cast<long>(m_));
    for (std::size_t i = 0; i < m_; ++i) r[static_cast<long>(i)] = rhs_[i];
    for (std::size_t j = 0; j < total_; ++j) {
      if (state_[j] == VarState::Basic || value_[j] == 0.0) continue;
      for_column(j, [&](std::size_t i, double v) { r[static_cast<long>(i)] -= v * value_[j]; });
    }
    const Eigen::VectorXd xb = ftran(r);
    for (std::size_t i = 0; i < m_; ++i) value_[head_[i]] = xb[static_cast<long>(i)];
    return true;
  }

  Eigen::VectorXd ftran(const Eigen::VectorXd& v) const {
    Eigen::VectorXd w = lu_.solve(v);
    for (const auto& eta : etas_) {
      const long r = static_cast<long>(eta.row);
      const double t = w[r] / eta.pivot;
      if (t != 0.0) {
        for (const auto& [i, wi] : eta.column) w[static_cast<long>(i)] -= wi * t;
      }
      w[r] = t;
    }
    return w;
  }

  Eigen::VectorXd btran(Eigen::VectorXd v) const {
    for (auto it = etas_.rbegin(); it != etas_.rend(); ++it) {
      const long r = static_cast<long>(it->row);
      double acc = v[r];
      for (const auto& [i, wi] : it->column) acc -= wi * v[static_cast<long>(i)];
      v[r] = acc / it->pivot;
    }
    return lu_.transpose().solve(v);
  }

  Eigen::VectorXd btran_costs() const {
    Eigen::VectorXd cb(static_cast<long>(m_));
    for (std::size_t i = 0; i < m_; ++i) cb[static_cast<long>(i)] = cost_[head_[i]];
    return btran(cb);
  }

  Eigen::VectorXd column_vector(std::size_t j) const {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(static_cast<long>(m_));
    for_column(j, [&](std::size_t i, double v) { a[static_cast<long>(i)] = v; });
    return a;
  }

  void pivot_in(std::size_t r, std::size_t q, const Eigen::VectorXd& w) {
    EtaFactor eta{r, w[static_cast<long>(r)], {}};
    for (std::size_t i = 0; i < m_; ++i) {
      if (i != r && w[static_cast<long>(i)] != 0.0) {
        eta.column.emplace_back(i, w[static_cast<long>(i)]);
      }
    }
    etas_.push_back(std::move(eta));
    head_[r] = q;
    state_[q] = VarState::Basic;
    if (static_cast<int>(etas_.size()) >= opt_.refactor_interval) refactor();
  }

  double objective() const {
    double acc = 0.0;
    for (std::size_t j = 0; j < total_; ++j) acc += cost_[j] * value_[j];
    return acc;
  }

  LPStatus iterate() {
    double best = objective();
    while (true) {
      if (iterations_ >= opt_.max_iterations) return LPStatus::IterationLimit;
      const Eigen::VectorXd y = btran_costs();

      std::size_t q = total_;
      double best_score = 0.0;
      double dq = 0.0;
      for (std::size_t j = 0; j < total_; ++j) {
        if (state_[j] == VarState::Basic || upper_[j] == 0.0) continue;
        const double d = cost_[j] - column_dot(j, y);
        const bool eligible = state_[j] == VarState::Lower ? d < -opt_.optimality
                                                           : d > opt_.optimality;
        if (!eligible) continue;
        if (bland_) {
          q = j;
          dq = d;
          break;
        }
        if (std::abs(d) > best_score) {
          best_score = std::abs(d);
          q = j;
          dq = d;
        }
      }
      if (q == total_) return LPStatus::Optimal;
      ++iterations_;

      const Eigen::VectorXd w = ftran(column_vector(q));
      const double dir = state_[q] == VarState::Lower ? 1.0 : -1.0;
      // Harris two-pass ratio test: bounds relaxed by the feasibility
      // tolerance give theta_max; among rows whose exact ratio stays below it
      // the largest pivot wins. Bland mode keeps the exact minimum ratio with
      // the lowest-index tie break.
      // Bland's rule picks by index, not by size, so it needs a firmer floor
      // to keep roundoff-sized entries out of the basis.
      const double relative = bland_ ? 1e-7 : 1e-9;
      double pivot_floor = opt_.pivot;
      for (std::size_t i = 0; i < m_; ++i) {
        pivot_floor = std::max(pivot_floor, relative * std::abs(w[static_cast<long>(i)]));
      }
      auto ratio = [&](std::size_t i, double slack) -> double {
        const double alpha = dir * w[static_cast<long>(i)];
        const std::size_t v = head_[i];
        if (alpha > pivot_floor) return (std::max(value_[v], 0.0) + slack) / alpha;
        if (alpha < -pivot_floor && std::isfinite(upper_[v])) {
          return (std::max(upper_[v] - value_[v], 0.0) + slack) / -alpha;
        }
        return kInfinity;
      };
      double theta = upper_[q];
      std::size_t leave = m_;
      double leave_alpha = 0.0;
      if (bland_) {
        for (std::size_t i = 0; i < m_; ++i) {
          const double limit = ratio(i, 0.0);
          if (!std::isfinite(limit)) continue;
          if (limit < theta - 1e-12 ||
              (limit <= theta + 1e-12 && (leave == m_ || head_[i] < head_[leave]))) {
            theta = std::min(theta, limit);
            leave = i;
          }
        }
      } else {
        double theta_max = upper_[q];
        for (std::size_t i = 0; i < m_; ++i) {
          theta_max = std::min(theta_max, ratio(i, opt_.feasibility));
        }
        double best_alpha = 0.0;
        for (std::size_t i = 0; i < m_; ++i) {
          const double limit = ratio(i, 0.0);
          if (!(limit <= theta_max)) continue;
          const double a = std::abs(w[static_cast<long>(i)]);
          if (a > best_alpha) {
            best_alpha = a;
            leave = i;
            theta = limit;
          }
        }
        if (leave != m_ && upper_[q] <= theta) {
          theta = upper_[q];
          leave = m_;
        }
      }
      if (leave != m_) leave_alpha = dir * w[static_cast<long>(leave)];
      if (!std::isfinite(theta)) return LPStatus::Unbounded;

      // The pivot from the column update must agree with the same entry taken
      // from the row; drift means the eta file is stale.
      if (leave != m_ && !etas_.empty()) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(static_cast<long>(m_));
        e[static_cast<long>(leave)] = 1.0;
        const double from_row = column_dot(q, btran(e));
        const double from_col = w[static_cast<long>(leave)];
        if (std::abs(from_row - from_col) > 1e-9 * (1.0 + std::abs(from_col))) {
          --iterations_;
          refactor();
          continue;
        }
      }

      for (std::size_t i = 0; i < m_; ++i) {
        value_[head_[i]] -= theta * dir * w[static_cast<long>(i)];
      }
      value_[q] += dir * theta;
      if (leave == m_) {
        state_[q] = state_[q] == VarState::Lower ? VarState::Upper : VarState::Lower;
        value_[q] = state_[q] == VarState::Lower ? 0.0 : upper_[q];
      } else {
        const std::size_t out = head_[leave];
        if (leave_alpha > 0.0) {
          state_[out] = VarState::Lower;
          value_[out] = 0.0;
        } else {
          state_[out] = VarState::Upper;
          value_[out] = upper_[out];
        }
        pivot_in(leave, q, w);
      }

      const double now = best + theta * dq * dir;
      if (now < best - 1e-12 * (1.0 + std::abs(best))) {
        best = now;
        stalled_ = 0;
        bland_ = false;
      } else if (++stalled_ >= opt_.stall_threshold) {
        bland_ = true;
      }
    }
  }

  // Replaces zero-valued basic artificials by structural columns where the
  // basis allows; artificials that cannot leave mark redundant rows.
  void drive_out_artificials() {
    for (std::size_t r = 0; r < m_; ++r) {
      if (head_[r] < n_) continue;
      Eigen::VectorXd e = Eigen::VectorXd::Zero(static_cast<long>(m_));
      e[static_cast<long>(r)] = 1.0;
      const Eigen::VectorXd rho = btran(e);
      std::size_t best = n_;
      double best_abs = 1e-7;
      for (std::size_t j = 0; j < n_; ++j) {
        if (state_[j] == VarState::Basic) continue;
        const double a = std::abs(column_dot(j, rho));
        if (a > best_abs) {
          best_abs = a;
          best = j;
        }
      }
      if (best == n_) continue;
      const std::size_t art = head_[r];
      const Eigen::VectorXd w = ftran(column_vector(best));
      state_[art] = VarState::Lower;
      value_[art] = 0.0;
      pivot_in(r, best, w);
    }
    refactor();
  }

  const StandardFormLP& lp_;
  const SimplexOptions& opt_;
  std::size_t m_, n_, total_;
  std::vector<double> sign_, rhs_;
  std::vector<std::size_t> col_start_, row_idx_;
  std::vector<double> val_;
  std::vector<double> upper_, cost_, value_;
  std::vector<VarState> state_;
  std::vector<std::size_t> head_;
  mutable Eigen::SparseLU<SparseMat, Eigen::COLAMDOrdering<int>> lu_;
  std::vector<EtaFactor> etas_;
  std::size_t iterations_ = 0;
  int stalled_ = 0;
  bool bland_ = false;
  bool warm_ = false;
};

}  // namespace

LPSolution solve(StandardFormLP lp, const SimplexOptions& options) {
  lp.finalize();
  if (lp.rows() == 0) {
    LPSolution sol;
    sol.x.assign(lp.cols(), 0.0);
    for (std::size_t j = 0; j < lp.cols(); ++j) {
      if (lp.cost()[j] < 0.0) {
        if (!std::isfinite(lp.upper()[j])) {
          sol.status = LPStatus::Unbounded;
          return sol;
        }
        sol.x[j] = lp.upper()[j];
      }
      sol.objective += lp.cost()[j] * sol.x[j];
    }
    sol.status = LPStatus::Optimal;
    sol.reduced_costs = lp.cost();
    return sol;
  }
  RevisedSimplex engine(lp, options);
  return engine.run();
}

namespace {

LPSolution solve_warm(StandardFormLP lp, const std::vector<std::size_t>& basis,
                      const std::vector<std::size_t>& at_upper, const SimplexOptions& options) {
  lp.finalize();
  RevisedSimplex engine(lp, options);
  if (!engine.warm_start(basis, at_upper)) return solve(std::move(lp), options);
  auto sol = engine.run();
  if (sol.status == LPStatus::Optimal) return sol;
  return solve(std::move(lp), options);
}

}  // namespace

LPSolution solve_lexicographic(StandardFormLP lp, const std::vector<double>& secondary,
                               const SimplexOptions& options) {
  if (secondary.size() != lp.cols()) {
    throw InvalidArgument("secondary objective length does not match the columns");
  }
  const auto first = solve(lp, options);
  if (first.status != LPStatus::Optimal) return first;
  return solve_lexicographic(std::move(lp), secondary, first, options);
}

LPSolution solve_lexicographic(StandardFormLP lp, const std::vector<double>& secondary,
                               const LPSolution& first, const SimplexOptions& options) {
  if (secondary.size() != lp.cols()) {
    throw InvalidArgument("secondary objective length does not match the columns");
  }
  if (first.status != LPStatus::Optimal) return first;

  // c x + s = opt with 0 <= s <= width keeps c x within [opt - width, opt].
  const std::size_t n = lp.cols();
  const std::size_t face = lp.add_row(first.objective);
  for (std::size_t j = 0; j < n; ++j) {
    if (lp.cost()[j] != 0.0) lp.add_entry(face, j, lp.cost()[j]);
  }
  const std::size_t slack = lp.add_variable(0.0, options.face_width);
  lp.add_entry(face, slack, 1.0);
  for (std::size_t j = 0; j < n; ++j) lp.set_cost(j, secondary[j]);

  LPSolution second;
  if (first.basis.size() + 1 == lp.rows()) {
    // Old artificials shift by one column; the face slack is basic in the new row.
    std::vector<std::size_t> basis;
    for (std::size_t j : first.basis) basis.push_back(j >= n ? j + 1 : j);
    basis.push_back(slack);
    second = solve_warm(lp, basis, first.at_upper, options);
  } else {
    second = solve(lp, options);
  }
  if (second.status != LPStatus::Optimal) return second;
  second.basis.clear();
  second.at_upper.clear();
  second.x.resize(n);
  second.reduced_costs.resize(n);
  second.duals.resize(face);
  second.iterations += first.iterations;
  return second;
}

LPSolution solve_dense(StandardFormLP lp, const SimplexOptions& options) {
  lp.finalize();
  const std::size_t n = lp.cols();
  if (n > 2000) throw ResourceError("dense reference solver limited to 2000 columns");
  const double tol = options.optimality;

  // Rows: A x = b, then x_j + t_j = u_j for finite bounds.
  std::vector<std::size_t> bounded;
  for (std::size_t j = 0; j < n; ++j) {
    if (std::isfinite(lp.upper()[j])) bounded.push_back(j);
  }
  const std::size_t m0 = lp.rows();
  const std::size_t rows = m0 + bounded.size();
  const std::size_t structural = n + bounded.size();
  const std::size_t cols = structural + rows;  // plus artificials
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(static_cast<long>(rows + 1),
                                            static_cast<long>(cols + 1));
  const long rhs_col = static_cast<long>(cols);
  for (const auto& t : lp.entries()) {
    T(static_cast<long>(t.row), static_cast<long>(t.col)) += t.value;
  }
  for (std::size_t i = 0; i < m0; ++i) T(static_cast<long>(i), rhs_col) = lp.rhs()[i];
  for (std::size_t k = 0; k < bounded.size(); ++k) {
    const long r = static_cast<long>(m0 + k);
    T(r, static_cast<long>(bounded[k])) = 1.0;
    T(r, static_cast<long>(n + k)) = 1.0;
    T(r, rhs_col) = lp.upper()[bounded[k]];
  }
  std::vector<double> sign(rows, 1.0);
  for (std::size_t i = 0; i < rows; ++i) {
    if (T(static_cast<long>(i), rhs_col) < 0.0) {
      sign[i] = -1.0;
      T.row(static_cast<long>(i)) *= -1.0;
    }
    T(static_cast<long>(i), static_cast<long>(structural + i)) = 1.0;
  }
  std::vector<std::size_t> basis(rows);
  for (std::size_t i = 0; i < rows; ++i) basis[i] = structural + i;

  const long obj = static_cast<long>(rows);
  auto price = [&](const std::vector<double>& c) {
    T.row(obj).setZero();
    for (std::size_t j = 0; j < cols; ++j) T(obj, static_cast<long>(j)) = c[j];
    for (std::size_t i = 0; i < rows; ++i) {
      const double cb = c[basis[i]];
      if (cb != 0.0) T.row(obj) -= cb * T.row(static_cast<long>(i));
    }
  };
  auto pivot = [&](std::size_t r, std::size_t q) {
    const long lr = static_cast<long>(r), lq = static_cast<long>(q);
    T.row(lr) /= T(lr, lq);
    for (long i = 0; i <= obj; ++i) {
      if (i != lr && T(i, lq) != 0.0) T.row(i) -= T(i, lq) * T.row(lr);
    }
    basis[r] = q;
  };
  std::size_t iterations = 0;
  auto run = [&](std::size_t allowed) -> LPStatus {
    while (true) {
      if (iterations >= options.max_iterations) return LPStatus::IterationLimit;
      std::size_t q = allowed;
      for (std::size_t j = 0; j < allowed; ++j) {
        if (T(obj, static_cast<long>(j)) < -tol) {
          q = j;
          break;
        }
      }
      if (q == allowed) return LPStatus::Optimal;
      std::size_t leave = rows;
      double theta = kInfinity;
      for (std::size_t i = 0; i < rows; ++i) {
        const double a = T(static_cast<long>(i), static_cast<long>(q));
        if (a <= options.pivot) continue;
        const double ratio = std::max(T(static_cast<long>(i), rhs_col), 0.0) / a;
        if (ratio < theta - 1e-12 ||
            (ratio <= theta + 1e-12 && leave != rows && basis[i] < basis[leave])) {
          theta = std::min(theta, ratio);
          leave = i;
        }
      }
      if (leave == rows) return LPStatus::Unbounded;
      pivot(leave, q);
      ++iterations;
    }
  };

  LPSolution sol;
  std::vector<double> c1(cols, 0.0);
  for (std::size_t j = structural; j < cols; ++j) c1[j] = 1.0;
  price(c1);
  const auto p1 = run(cols);
  sol.iterations = iterations;
  if (p1 != LPStatus::Optimal) {
    sol.status = p1;
    return sol;
  }
  if (-T(obj, rhs_col) > options.feasibility) {
    sol.status = LPStatus::Infeasible;
    return sol;
  }
  for (std::size_t i = 0; i < rows; ++i) {
    if (basis[i] < structural) continue;
    for (std::size_t j = 0; j < structural; ++j) {
      if (std::abs(T(static_cast<long>(i), static_cast<long>(j))) > 1e-9) {
        pivot(i, j);
        break;
      }
    }
  }
  std::vector<double> c2(cols, 0.0);
  for (std::size_t j = 0; j < n; ++j) c2[j] = lp.cost()[j];
  price(c2);
  sol.status = run(structural);
  sol.iterations = iterations;
  if (sol.status != LPStatus::Optimal) return sol;

  std::vector<double> full(cols, 0.0);
  for (std::size_t i = 0; i < rows; ++i) full[basis[i]] = T(static_cast<long>(i), rhs_col);
  sol.x.assign(full.begin(), full.begin() + static_cast<long>(n));
  for (auto& v : sol.x) v = std::max(v, 0.0);
  // Row duals: the artificial column of row i has reduced cost -y_i.
  sol.duals.resize(m0);
  for (std::size_t i = 0; i < m0; ++i) {
    sol.duals[i] = -sign[i] * T(obj, static_cast<long>(structural + i));
  }
  sol.objective = 0.0;
  for (std::size_t j = 0; j < n; ++j) sol.objective += lp.cost()[j] * sol.x[j];
  const auto aty = lp.transpose_times(sol.duals);
  sol.reduced_costs.resize(n);
  for (std::size_t j = 0; j < n; ++j) sol.reduced_costs[j] = lp.cost()[j] - aty[j];
  return sol;
}

}  // namespace skembed
