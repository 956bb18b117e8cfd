#include "skembed/optsep.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace skembed {

std::vector<std::string> EmbeddingProblem::validate() const {
  spec.validate();
  cost.check_features(spec);
  if (start.empty() || target.empty()) throw InvalidArgument("start and target laws must be non-empty");
  for (const auto& a : start.atoms()) {
    if (std::find(spec.start_support.begin(), spec.start_support.end(), a.index) ==
        spec.start_support.end()) {
      throw InvalidArgument("start law charges level " + std::to_string(a.index) +
                            " outside the lattice start support");
    }
  }
  if (mode.soft && !(mode.epsilon >= 0.0 && mode.epsilon <= 1.0)) {
    throw InvalidArgument("soft-mode epsilon must lie in [0,1]");
  }
  if (cost.name == "perkins") {
    for (const auto& a : start.atoms()) {
      if (target.weight(a.index) > 0.0) {
        throw InvalidArgument("perkins cost requires the target to have no mass at a start level");
      }
    }
  }
  std::vector<std::string> warnings;
  if (spec.is_martingale() && !convex_order(start, target, spec.step_size)) {
    warnings.push_back("start law is not below the target in convex order");
  }
  return warnings;
}

double DualCertificate::psi_at(int level) const {
  const auto it = std::lower_bound(levels.begin(), levels.end(), level);
  if (it == levels.end() || *it != level) {
    throw InvalidArgument("certificate has no value at level " + std::to_string(level));
  }
  return psi[static_cast<std::size_t>(it - levels.begin())];
}

namespace {

// Acyclic layered network shared by the state-graph LP and the path-tree LP.
struct Network {
  std::vector<AugmentedState> states;
  std::vector<std::vector<std::pair<std::size_t, double>>> parents;
  std::vector<double> start_mass;
  std::vector<bool> terminal;
};

Network network_of(const StateGraph& g, const DiscreteMeasure& lambda) {
  Network net;
  net.states.assign(g.states().begin(), g.states().end());
  net.parents.resize(g.size());
  net.start_mass.assign(g.size(), 0.0);
  net.terminal.resize(g.size());
  for (std::size_t s = 0; s < g.size(); ++s) {
    for (const auto& e : g.parents(s)) net.parents[s].emplace_back(e.target, e.prob);
    net.terminal[s] = g.is_terminal(s);
  }
  for (std::size_t r : g.roots()) net.start_mass[r] = lambda.weight(g.state(r).x);
  return net;
}

StandardFormLP build_lp(const EmbeddingProblem& problem, const Network& net,
                        const StateFunction& gamma, LPLayout& layout) {
  StandardFormLP lp;
  const std::size_t n = net.states.size();
  const auto& spec = problem.spec;

  std::set<int> levels;
  for (const auto& a : problem.target.atoms()) levels.insert(a.index);
  if (problem.mode.soft) {
    for (const auto& s : net.states) levels.insert(s.x);
  }
  layout.marginal_levels.assign(levels.begin(), levels.end());

  layout.stop_col.resize(n);
  layout.continue_col.assign(n, LPLayout::npos);
  for (std::size_t s = 0; s < n; ++s) {
    const bool allowed = problem.mode.soft || problem.target.contains(net.states[s].x);
    layout.stop_col[s] = lp.add_variable(gamma(net.states[s], spec), allowed ? kInfinity : 0.0);
    if (!net.terminal[s]) layout.continue_col[s] = lp.add_variable(0.0);
  }
  layout.flow_row.resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    const auto r = lp.add_row(net.start_mass[s]);
    layout.flow_row[s] = r;
    lp.add_entry(r, layout.stop_col[s], 1.0);
    if (layout.continue_col[s] != LPLayout::npos) lp.add_entry(r, layout.continue_col[s], 1.0);
    for (const auto& [p, prob] : net.parents[s]) lp.add_entry(r, layout.continue_col[p], -prob);
  }
  std::map<int, std::size_t> row_of;
  for (int x : layout.marginal_levels) {
    const auto r = lp.add_row(problem.target.weight(x));
    row_of[x] = r;
    layout.marginal_row.push_back(r);
  }
  for (std::size_t s = 0; s < n; ++s) {
    const auto it = row_of.find(net.states[s].x);
    if (it != row_of.end()) lp.add_entry(it->second, layout.stop_col[s], 1.0);
  }
  if (problem.mode.soft) {
    layout.tv_row = lp.add_row(2.0 * problem.mode.epsilon);
    for (std::size_t k = 0; k < layout.marginal_levels.size(); ++k) {
      const auto up = lp.add_variable(0.0), down = lp.add_variable(0.0);
      lp.add_entry(layout.marginal_row[k], up, -1.0);
      lp.add_entry(layout.marginal_row[k], down, 1.0);
      lp.add_entry(layout.tv_row, up, 1.0);
      lp.add_entry(layout.tv_row, down, 1.0);
      layout.excess_col.push_back(up);
      layout.deficit_col.push_back(down);
    }
    layout.tv_slack_col = lp.add_variable(0.0);
    lp.add_entry(layout.tv_row, layout.tv_slack_col, 1.0);
  }
  lp.finalize();
  return lp;
}

StateFunction primary_of(const CostFunctional& cost) {
  return [&cost](const AugmentedState& s, const LatticeSpec& spec) {
    return cost.evaluate(s, spec);
  };
}

std::vector<double> secondary_vector(const EmbeddingProblem& problem, const Network& net,
                                     const LPLayout& layout, std::size_t cols) {
  std::vector<double> c2(cols, 0.0);
  for (std::size_t s = 0; s < net.states.size(); ++s) {
    c2[layout.stop_col[s]] = problem.cost.evaluate_secondary(net.states[s], problem.spec);
  }
  return c2;
}

std::string infeasibility_hint(const EmbeddingProblem& problem, const StateGraph* graph) {
  std::vector<std::string> reasons;
  if (graph) {
    std::set<int> reachable;
    for (const auto& s : graph->states()) reachable.insert(s.x);
    for (const auto& a : problem.target.atoms()) {
      if (!reachable.count(a.index)) {
        reasons.push_back("target level " + std::to_string(a.index) +
                          " is never reached within the horizon (parity or distance)");
      }
    }
  }
  if (problem.spec.is_martingale() &&
      !convex_order(problem.start, problem.target, problem.spec.step_size)) {
    reasons.push_back("start law is not below the target in convex order");
  }
  reasons.push_back("the horizon may be too short to move all mass off levels outside the target support");
  std::ostringstream out;
  for (std::size_t k = 0; k < reasons.size(); ++k) out << (k ? "; " : "") << reasons[k];
  return out.str();
}

DualCertificate make_certificate(const EmbeddingProblem& problem, const StateGraph& g,
                                 const LPLayout& layout, const LPSolution& lp_sol) {
  DualCertificate cert;
  const std::size_t n = g.size();
  cert.phi.resize(n);
  for (std::size_t s = 0; s < n; ++s) cert.phi[s] = lp_sol.duals[layout.flow_row[s]];

  std::map<int, double> psi;
  for (std::size_t k = 0; k < layout.marginal_levels.size(); ++k) {
    psi[layout.marginal_levels[k]] = lp_sol.duals[layout.marginal_row[k]];
  }
  // Levels without a marginal row: the largest value keeping phi + psi <= gamma.
  for (std::size_t s = 0; s < n; ++s) {
    const int x = g.state(s).x;
    if (std::binary_search(layout.marginal_levels.begin(), layout.marginal_levels.end(), x)) continue;
    const double bound = problem.cost.evaluate(g.state(s), g.spec()) - cert.phi[s];
    const auto it = psi.find(x);
    if (it == psi.end()) {
      psi[x] = bound;
    } else {
      it->second = std::min(it->second, bound);
    }
  }
  if (problem.mode.soft) {
    cert.tv_multiplier = lp_sol.duals[layout.tv_row];
  } else {
    double kappa = 0.0;
    for (std::size_t r : g.roots()) kappa += problem.start.weight(g.state(r).x) * cert.phi[r];
    for (auto& v : cert.phi) v -= kappa;
    for (auto& [x, v] : psi) v += kappa;
  }
  for (const auto& [x, v] : psi) {
    cert.levels.push_back(x);
    cert.psi.push_back(v);
  }
  cert.slack.resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    cert.slack[s] = problem.cost.evaluate(g.state(s), g.spec()) - cert.phi[s] -
                    cert.psi_at(g.state(s).x);
  }
  double dual = 0.0;
  for (std::size_t r : g.roots()) dual += problem.start.weight(g.state(r).x) * cert.phi[r];
  for (const auto& a : problem.target.atoms()) dual += a.weight * cert.psi_at(a.index);
  if (cert.tv_multiplier) dual += 2.0 * problem.mode.epsilon * *cert.tv_multiplier;
  cert.dual_objective = dual;
  return cert;
}

}  // namespace

StandardFormLP assemble_lp(const EmbeddingProblem& problem, const StateGraph& graph,
                           LPLayout* layout) {
  problem.cost.check_features(problem.spec);
  LPLayout local;
  const auto net = network_of(graph, problem.start);
  return build_lp(problem, net, primary_of(problem.cost), layout ? *layout : local);
}

OptimalSolution solve(const EmbeddingProblem& problem, const SimplexOptions& options) {
  problem.validate();
  auto graph = std::make_shared<const StateGraph>(enumerate_reachable(problem.spec, problem.start));
  LPLayout layout;
  const auto net = network_of(*graph, problem.start);
  const auto lp = build_lp(problem, net, primary_of(problem.cost), layout);

  const auto first = solve(lp, options);
  if (first.status == LPStatus::Infeasible) {
    const bool ok = verify_farkas(lp, first.farkas, options.feasibility);
    throw InfeasibleError(infeasibility_hint(problem, graph.get()), first.farkas, ok);
  }
  if (first.status != LPStatus::Optimal) {
    throw Error("embedding LP ended with status " + std::string(to_string(first.status)));
  }

  LPSolution final_sol = first;
  std::optional<double> secondary_objective;
  if (problem.secondary && problem.cost.has_secondary()) {
    const auto c2 = secondary_vector(problem, net, layout, lp.cols());
    final_sol = solve_lexicographic(lp, c2, first, options);
    if (final_sol.status != LPStatus::Optimal) {
      throw Error("secondary LP ended with status " + std::string(to_string(final_sol.status)));
    }
    secondary_objective = final_sol.objective;
  }

  const std::size_t n = graph->size();
  std::vector<double> p(n, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    const double stop = std::max(final_sol.x[layout.stop_col[s]], 0.0);
    const double go = layout.continue_col[s] == LPLayout::npos
                          ? 0.0
                          : std::max(final_sol.x[layout.continue_col[s]], 0.0);
    if (graph->is_terminal(s)) {
      p[s] = 1.0;
    } else if (stop + go > 1e-15) {
      p[s] = std::clamp(stop / (stop + go), 0.0, 1.0);
    } else {
      p[s] = problem.target.contains(graph->state(s).x) ? 1.0 : 0.0;
    }
  }
  OptimalSolution sol{graph, RandomizedStoppingTime(graph, problem.start, std::move(p)),
                      0.0, std::nullopt, std::nullopt, 0.0, 0.0, 0};
  sol.objective = expected_cost(sol.xi, problem.cost);
  sol.secondary_objective = secondary_objective;
  sol.iterations = final_sol.iterations;
  sol.certificate = make_certificate(problem, *graph, layout, first);
  sol.gap = std::abs(sol.objective - sol.certificate->dual_objective);
  sol.tv_deviation = total_variation(pushforward_law(sol.xi), problem.target);
  return sol;
}

CertificateReport certificate_check(const OptimalSolution& sol, const EmbeddingProblem& problem,
                                    double tol) {
  if (!sol.certificate) {
    CertificateReport report;
    report.ok = false;
    report.failures.push_back("solution carries no certificate");
    return report;
  }
  return certificate_check(sol.xi, *sol.certificate, problem, tol);
}

CertificateReport certificate_check(const RandomizedStoppingTime& xi,
                                    const DualCertificate& cert,
                                    const EmbeddingProblem& problem, double tol) {
  CertificateReport report;
  const auto& g = xi.graph();
  auto fail = [&](const std::string& what) {
    report.ok = false;
    report.failures.push_back(what);
  };
  if (cert.phi.size() != g.size()) {
    fail("certificate phi does not match the state count");
    return report;
  }
  auto psi = [&](int x) -> std::optional<double> {
    const auto it = std::lower_bound(cert.levels.begin(), cert.levels.end(), x);
    if (it == cert.levels.end() || *it != x) return std::nullopt;
    return cert.psi[static_cast<std::size_t>(it - cert.levels.begin())];
  };

  double phi0 = 0.0;
  for (std::size_t r : g.roots()) phi0 += problem.start.weight(g.state(r).x) * cert.phi[r];
  if (!problem.mode.soft && std::abs(phi0) > tol) {
    fail("normalization: E[phi(start)] = " + std::to_string(phi0));
  }

  std::size_t worst_slack_state = 0, worst_cs_state = 0;
  double worst_cs = 0.0;
  for (std::size_t s = 0; s < g.size(); ++s) {
    const auto& st = g.state(s);
    const auto level_psi = psi(st.x);
    if (!level_psi) {
      fail("certificate has no psi at level " + std::to_string(st.x));
      return report;
    }
    const double slack = problem.cost.evaluate(st, g.spec()) - cert.phi[s] - *level_psi;
    if (slack < report.worst_slack) {
      report.worst_slack = slack;
      worst_slack_state = s;
    }
    if (xi.stopped(s) > tol && slack > worst_cs) {
      worst_cs = slack;
      worst_cs_state = s;
    }
    if (!g.is_terminal(s)) {
      double next = 0.0;
      for (const auto& e : g.children(s)) next += e.prob * cert.phi[e.target];
      const double drift = cert.phi[s] - next;  // must be <= 0, and 0 where mass flows
      const double violation = xi.continuing(s) > tol ? std::abs(drift) : std::max(drift, 0.0);
      if (violation > report.worst_martingale) report.worst_martingale = violation;
      if (violation > tol) {
        fail("martingale property fails at " + state_key(st) + " by " + std::to_string(violation));
      }
    }
  }
  if (report.worst_slack < -tol) {
    fail("dual feasibility fails at " + state_key(g.state(worst_slack_state)) +
         ": slack " + std::to_string(report.worst_slack));
  }
  if (worst_cs > tol) {
    fail("complementary slackness fails at " + state_key(g.state(worst_cs_state)) +
         ": stopped mass with slack " + std::to_string(worst_cs));
  }

  report.primal = expected_cost(xi, problem.cost);
  double dual = phi0;
  for (const auto& a : problem.target.atoms()) {
    const auto v = psi(a.index);
    if (!v) {
      fail("certificate has no psi at target level " + std::to_string(a.index));
      return report;
    }
    dual += a.weight * *v;
  }
  if (problem.mode.soft) {
    const double eta = cert.tv_multiplier.value_or(0.0);
    if (eta > tol) fail("total-variation multiplier must be non-positive");
    for (double v : cert.psi) {
      if (std::abs(v) > -eta + tol) {
        fail("level multiplier exceeds the total-variation multiplier");
        break;
      }
    }
    dual += 2.0 * problem.mode.epsilon * eta;
    if (total_variation(pushforward_law(xi), problem.target) > problem.mode.epsilon + tol) {
      fail("embedded law exceeds the total-variation budget");
    }
  } else {
    const double dev = max_atom_deviation(pushforward_law(xi), problem.target);
    if (dev > 1e-9) fail("embedded law misses the target by " + std::to_string(dev));
  }
  report.dual = dual;
  report.gap = std::abs(report.primal - dual);
  if (report.gap > tol * (1.0 + std::abs(report.primal))) {
    fail("duality gap " + std::to_string(report.gap));
  }
  return report;
}

PathTreeResult solve_pathtree_oracle(const EmbeddingProblem& problem,
                                     const SimplexOptions& options) {
  problem.validate();
  if (problem.spec.steps > kMaxOracleSteps) {
    throw ResourceError("path-tree oracle limited to " + std::to_string(kMaxOracleSteps) + " steps");
  }
  Network net;
  std::vector<std::size_t> frontier;
  for (const auto& a : problem.start.atoms()) {
    net.states.push_back(start_state(problem.spec, a.index));
    net.parents.emplace_back();
    net.start_mass.push_back(a.weight);
    net.terminal.push_back(problem.spec.steps == 0);
    frontier.push_back(net.states.size() - 1);
  }
  for (int k = 0; k < problem.spec.steps; ++k) {
    std::vector<std::size_t> next;
    for (std::size_t node : frontier) {
      const auto kids = child_states(problem.spec, net.states[node]);
      for (const auto& [child, prob] : kids) {
        net.states.push_back(child);
        net.parents.push_back({{node, prob}});
        net.start_mass.push_back(0.0);
        net.terminal.push_back(child.k == problem.spec.steps);
        next.push_back(net.states.size() - 1);
      }
    }
    frontier = std::move(next);
  }

  LPLayout layout;
  const auto lp = build_lp(problem, net, primary_of(problem.cost), layout);
  auto sol = solve(lp, options);
  if (sol.status == LPStatus::Infeasible) {
    throw InfeasibleError(infeasibility_hint(problem, nullptr), sol.farkas,
                          verify_farkas(lp, sol.farkas, options.feasibility));
  }
  if (sol.status != LPStatus::Optimal) throw Error("path-tree LP did not reach optimality");

  PathTreeResult result;
  result.nodes = net.states.size();
  result.objective = sol.objective;
  if (problem.secondary && problem.cost.has_secondary()) {
    const auto c2 = secondary_vector(problem, net, layout, lp.cols());
    sol = solve_lexicographic(lp, c2, sol, options);
    if (sol.status != LPStatus::Optimal) throw Error("path-tree secondary LP failed");
    result.secondary_objective = sol.objective;
  }
  std::map<int, double> law;
  for (std::size_t s = 0; s < net.states.size(); ++s) {
    const double m = sol.x[layout.stop_col[s]];
    if (m > 0.0) law[net.states[s].x] += m;
  }
  std::vector<Atom> atoms;
  for (const auto& [x, w] : law) atoms.push_back({x, w});
  result.law = DiscreteMeasure::from_masses(std::move(atoms), 1e-15);
  return result;
}

std::vector<int> latest_stop_time(const RandomizedStoppingTime& xi, double tol) {
  const auto& g = xi.graph();
  std::vector<int> latest(g.size(), -1);
  for (std::size_t s = g.size(); s-- > 0;) {
    if (xi.stopped(s) > tol) latest[s] = g.state(s).k;
    if (xi.continuing(s) > tol) {
      for (const auto& e : g.children(s)) latest[s] = std::max(latest[s], latest[e.target]);
    }
  }
  return latest;
}

std::vector<Violation> verify_monotonicity(const RandomizedStoppingTime& xi,
                                           const CostFunctional& cost, double tol,
                                           bool horizon_aware) {
  const auto& g = xi.graph();
  const int horizon = g.spec().steps;
  const auto latest = latest_stop_time(xi, tol);
  std::map<int, std::vector<std::size_t>> going, stopped;
  for (std::size_t s = 0; s < g.size(); ++s) {
    const int x = g.state(s).x;
    if (xi.continuing(s) > tol) going[x].push_back(s);
    if (xi.stopped(s) > tol) stopped[x].push_back(s);
  }
  std::vector<Violation> out;
  for (const auto& [x, gs] : going) {
    const auto it = stopped.find(x);
    if (it == stopped.end()) continue;
    for (std::size_t a : gs) {
      const int remaining = latest[a] - g.state(a).k;
      for (std::size_t b : it->second) {
        if (horizon_aware && g.state(b).k + remaining > horizon) continue;
        if (sg_pair(cost, g.state(a), g.state(b))) out.push_back({a, b});
      }
    }
  }
  return out;
}

Coupling induced_coupling(const RandomizedStoppingTime& xi) {
  const auto& g = xi.graph();
  std::vector<double> p(xi.stop_prob().begin(), xi.stop_prob().end());
  Coupling c;
  std::set<int> ends;
  std::vector<std::map<int, double>> rows;
  for (const auto& a : xi.start().atoms()) {
    RandomizedStoppingTime part(xi.graph_ptr(), DiscreteMeasure::dirac(a.index), p);
    std::map<int, double> row;
    for (std::size_t s = 0; s < g.size(); ++s) {
      if (part.stopped(s) > 0.0) row[g.state(s).x] += a.weight * part.stopped(s);
    }
    for (const auto& [x, m] : row) ends.insert(x);
    c.start_levels.push_back(a.index);
    rows.push_back(std::move(row));
  }
  c.end_levels.assign(ends.begin(), ends.end());
  for (const auto& row : rows) {
    std::vector<double> line;
    for (int x : c.end_levels) {
      const auto it = row.find(x);
      line.push_back(it == row.end() ? 0.0 : it->second);
    }
    c.mass.push_back(std::move(line));
  }
  return c;
}

FeasibilityReport feasibility_check(const EmbeddingProblem& problem, const SimplexOptions& options) {
  problem.validate();
  const auto graph = enumerate_reachable(problem.spec, problem.start);
  auto lp = assemble_lp(problem, graph);
  for (std::size_t j = 0; j < lp.cols(); ++j) lp.set_cost(j, 0.0);
  const auto sol = solve(lp, options);
  FeasibilityReport report;
  report.feasible = sol.status == LPStatus::Optimal;
  if (!report.feasible) {
    report.reason = infeasibility_hint(problem, &graph);
    report.farkas = sol.farkas;
  }
  return report;
}

}  // namespace skembed
