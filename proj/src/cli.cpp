#include "skembed/cli.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "skembed/barriers.hpp"
#include "skembed/error.hpp"
#include "skembed/io.hpp"
#include "skembed/montecarlo.hpp"
#include "skembed/optsep.hpp"

namespace skembed {

using nlohmann::json;

namespace {

struct RunConfig {
  std::string problem;
  std::string solution;
  std::string out = "-";
  std::string json_out;
  std::uint64_t seed = 20240601;
  std::size_t samples = 100000;
  unsigned workers = 1;
  std::string mode;
  std::optional<double> epsilon;
  bool oracle = false;
  double tol_feasibility = 1e-9;
  double tol_optimality = 1e-9;
  double tol_certificate = 1e-8;
  double tol_monotonicity = 1e-9;
  double tol_support = 1e-10;
  std::optional<double> tol_kolmogorov;
};

void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path);
  if (!f) throw InvalidArgument("cannot write " + path);
  f << text;
}

SimplexOptions simplex_options(const RunConfig& c) {
  SimplexOptions o;
  o.feasibility = c.tol_feasibility;
  o.optimality = c.tol_optimality;
  return o;
}

EmbeddingProblem load_problem(const RunConfig& c) {
  auto p = problem_from_json(read_json_file(c.problem));
  if (!c.mode.empty()) {
    if (c.mode == "exact") {
      p.mode = SolveMode::exact();
    } else if (c.mode == "soft") {
      if (!c.epsilon) throw InvalidArgument("--mode soft needs --epsilon");
      p.mode = SolveMode::tv(*c.epsilon);
    } else {
      throw InvalidArgument("--mode must be exact or soft");
    }
  } else if (c.epsilon) {
    p.mode = SolveMode::tv(*c.epsilon);
  }
  return p;
}

/// Stopping rule stored in a solution file, on a freshly enumerated graph.
RandomizedStoppingTime load_rule(const json& sol, const EmbeddingProblem& p) {
  auto graph = std::make_shared<const StateGraph>(enumerate_reachable(p.spec, p.start));
  auto probs = stop_prob_from_json(*graph, sol);
  return from_stop_probabilities(graph, p.start, std::move(probs));
}

int infeasible_exit(const InfeasibleError& e, const RunConfig& c, std::ostream& out,
                    std::ostream& err) {
  json j = {{"status", "infeasible"},
            {"hint", e.hint()},
            {"farkas", e.farkas()},
            {"farkas_verified", e.verified()}};
  emit(c.out, canonical_dump(j), out);
  err << "infeasible: " << e.hint() << "\n";
  return kExitInfeasible;
}

int cmd_solve(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const auto p = load_problem(c);
  for (const auto& w : p.validate()) err << "warning: " << w << "\n";
  const auto sol = solve(p, simplex_options(c));
  json j = solution_to_json(sol, p);
  if (c.oracle) {
    const auto o = solve_pathtree_oracle(p, simplex_options(c));
    json oj = {{"objective", o.objective},
               {"difference", std::abs(o.objective - sol.objective)},
               {"nodes", o.nodes},
               {"law", o.law}};
    if (o.secondary_objective) oj["secondary_objective"] = *o.secondary_objective;
    j["oracle"] = oj;
  }
  emit(c.out, canonical_dump(j), out);
  return kExitOk;
}

int cmd_verify(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const auto p = load_problem(c);
  const auto sol = read_json_file(c.solution);
  const auto xi = load_rule(sol, p);
  json report = json::object();

  // Certificate and marginal constraints, recomputed from the stored rule.
  json cert_j;
  if (sol.contains("certificate")) {
    const auto cert = certificate_from_json(sol.at("certificate"), xi.graph());
    const auto r = certificate_check(xi, cert, p, c.tol_certificate);
    std::vector<std::string> failures = r.failures;
    bool ok = r.ok;
    if (sol.contains("objective")) {
      const double claimed = sol.at("objective").get<double>();
      if (std::abs(claimed - r.primal) > c.tol_certificate * (1.0 + std::abs(r.primal))) {
        ok = false;
        failures.push_back("reported objective differs from the rule's cost");
      }
    }
    cert_j = {{"passed", ok},
              {"primal", r.primal},
              {"dual", r.dual},
              {"gap", r.gap},
              {"worst_slack", r.worst_slack},
              {"worst_martingale", r.worst_martingale},
              {"failures", failures}};
  } else {
    cert_j = {{"passed", false}, {"failures", {"solution carries no certificate"}}};
  }
  report["certificate"] = cert_j;

  const auto violations = verify_monotonicity(xi, p.cost, c.tol_monotonicity);
  json pairs = json::array();
  for (const auto& v : violations) {
    pairs.push_back({state_key(xi.graph().state(v.going)),
                     state_key(xi.graph().state(v.stopped))});
  }
  report["monotonicity"] = {
      {"passed", violations.empty()}, {"violations", violations.size()}, {"pairs", pairs}};

  // In soft mode the rule embeds its own law, not the target.
  const DiscreteMeasure reference = p.mode.soft ? pushforward_law(xi) : p.target;
  const auto mc = verify_embedding(xi, reference, c.samples, c.seed, c.tol_kolmogorov,
                                   c.workers, &p.cost);
  report["embedding"] = mc;

  const bool passed = cert_j.at("passed").get<bool>() && violations.empty() && mc.passed;
  report["passed"] = passed;
  report["seed"] = c.seed;
  emit(c.out, canonical_dump(report), out);
  if (!passed) {
    for (const auto& f : cert_j.at("failures")) err << "certificate: " << f.get<std::string>() << "\n";
    if (!violations.empty()) err << "monotonicity: " << violations.size() << " stop-go pairs\n";
    if (!mc.passed) err << "embedding: kolmogorov " << mc.kolmogorov << " > " << mc.tolerance << "\n";
    return kExitVerifyFailed;
  }
  return kExitOk;
}

int cmd_barrier(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const auto p = load_problem(c);
  std::optional<PhaseBarrier> b;
  try {
    if (c.solution.empty()) {
      b = extract_barrier(solve(p, simplex_options(c)), p, c.tol_support);
    } else {
      b = extract_barrier(load_rule(read_json_file(c.solution), p), p.cost, c.tol_support);
    }
  } catch (const BarrierKindError& e) {
    err << e.what() << "\n";
    return kExitBarrierKind;
  }
  emit(c.out, export_barrier_csv(*b), out);
  if (!c.json_out.empty()) emit(c.json_out, canonical_dump(json(*b)), out);
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Optimal Skorokhod embeddings on lattices"};
  app.require_subcommand(1);
  RunConfig c;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--problem", c.problem, "problem JSON file")->required();
    sub->add_option("--out", c.out, "output file, - for standard output");
    sub->add_option("--mode", c.mode, "exact or soft (overrides the problem file)");
    sub->add_option("--epsilon", c.epsilon, "total-variation budget for soft mode")
        ->check(CLI::Range(0.0, 1.0));
    sub->add_option("--tol-feasibility", c.tol_feasibility, "simplex feasibility tolerance");
    sub->add_option("--tol-optimality", c.tol_optimality, "simplex optimality tolerance");
  };

  auto* solve_cmd = app.add_subcommand("solve", "solve the embedding LP");
  add_common(solve_cmd);
  solve_cmd->add_flag("--oracle", c.oracle, "also run the path-tree oracle");

  auto* verify_cmd = app.add_subcommand("verify", "certificate, stop-go and Monte Carlo checks");
  add_common(verify_cmd);
  verify_cmd->add_option("--solution", c.solution, "solution JSON file")->required();
  verify_cmd->add_option("--seed", c.seed, "Monte Carlo seed");
  verify_cmd->add_option("--samples", c.samples, "Monte Carlo sample count")
      ->check(CLI::PositiveNumber);
  verify_cmd->add_option("--workers", c.workers, "sampling threads")->check(CLI::PositiveNumber);
  verify_cmd->add_option("--tol-certificate", c.tol_certificate, "certificate tolerance");
  verify_cmd->add_option("--tol-monotonicity", c.tol_monotonicity, "stop-go mass tolerance");
  verify_cmd->add_option("--tol-kolmogorov", c.tol_kolmogorov,
                         "Kolmogorov tolerance (default: DKW radius at 99.9%, at least 0.01)");

  auto* barrier_cmd = app.add_subcommand("barrier", "extract and export the stopping region");
  add_common(barrier_cmd);
  barrier_cmd->add_option("--solution", c.solution, "solution JSON file (solves if absent)");
  barrier_cmd->add_option("--json", c.json_out, "also write the barrier as JSON");
  barrier_cmd->add_option("--tol-support", c.tol_support, "mass below which a state is ignored");

  std::vector<std::string> argv(args.rbegin(), args.rend());  // CLI11 pops from the back
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n";
    return kExitInput;
  }

  try {
    if (*solve_cmd) return cmd_solve(c, out, err);
    if (*verify_cmd) return cmd_verify(c, out, err);
    return cmd_barrier(c, out, err);
  } catch (const InfeasibleError& e) {
    return infeasible_exit(e, c, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }
}

}  // namespace skembed
