// Acceptance battery. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <future>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "skembed/barriers.hpp"
#include "skembed/montecarlo.hpp"
#include "skembed/optsep.hpp"

using namespace skembed;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Collects failures for one criterion.
class Criterion {
 public:
  explicit Criterion(std::string title) : title_(std::move(title)) {}

  void expect(bool ok, const std::string& what) {
    ++checks_;
    if (!ok) failures_.push_back(what);
  }
  void note(std::string s) { notes_.push_back(std::move(s)); }
  bool passed() const { return failures_.empty() && checks_ > 0; }

  void print(int number) const {
    std::printf("%s %2d %s (%zu checks", passed() ? "PASS" : "FAIL", number, title_.c_str(),
                checks_);
    for (const auto& n : notes_) std::printf("; %s", n.c_str());
    std::printf(")\n");
    for (std::size_t i = 0; i < failures_.size() && i < 10; ++i) {
      std::printf("       - %s\n", failures_[i].c_str());
    }
    if (failures_.size() > 10) std::printf("       - ... %zu more\n", failures_.size() - 10);
  }

 private:
  std::string title_;
  std::size_t checks_ = 0;
  std::vector<std::string> failures_;
  std::vector<std::string> notes_;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

AugmentedState st(int k, int x) { return {k, x, std::nullopt, std::nullopt, std::nullopt}; }

EmbeddingProblem make_problem(const LatticeSpec& spec, DiscreteMeasure lambda, DiscreteMeasure mu,
                              CostFunctional cost) {
  return {spec, std::move(lambda), std::move(mu), std::move(cost), SolveMode::exact(), false};
}

RandomizedStoppingTime rule(const LatticeSpec& spec, const DiscreteMeasure& lambda,
                            const std::function<double(const AugmentedState&)>& p) {
  auto g = std::make_shared<const StateGraph>(enumerate_reachable(spec, lambda));
  std::vector<double> v(g->size());
  for (std::size_t s = 0; s < g->size(); ++s) v[s] = g->is_terminal(s) ? 1.0 : p(g->state(s));
  return from_stop_probabilities(g, lambda, v);
}

// Zero-mean targets whose support gaps are at most two levels, so no mass can
// be trapped away from the support before the horizon.
const DiscreteMeasure kSkewed({{-2, 0.2}, {-1, 0.2}, {0, 0.2}, {1, 0.3}, {3, 0.1}});
const DiscreteMeasure kNoZero({{-2, 0.2}, {-1, 0.3}, {1, 0.4}, {3, 0.1}});
const DiscreteMeasure kSpread({{-4, 0.1}, {-3, 0.1}, {-1, 0.3}, {0, 0.1}, {2, 0.3}, {4, 0.1}});
const DiscreteMeasure kEvenWide({{-8, 0.04}, {-6, 0.06}, {-4, 0.1}, {-2, 0.15}, {0, 0.3},
                                 {2, 0.15}, {4, 0.1}, {6, 0.06}, {8, 0.04}});
const DiscreteMeasure kTwoPoint({{-1, 0.5}, {1, 0.5}});
const DiscreteMeasure kThreePoint({{-2, 0.25}, {0, 0.5}, {2, 0.25}});

struct Instance {
  std::string name;
  EmbeddingProblem problem;
};

std::vector<Instance> battery() {
  std::vector<Instance> out;
  const auto add = [&](std::string name, const LatticeSpec& spec, DiscreteMeasure lam,
                       DiscreteMeasure mu, CostFunctional c) {
    // Costs with a tie-break functional are solved lexicographically, which
    // selects the optimizer the structure theorems describe.
    auto p = make_problem(spec, std::move(lam), std::move(mu), std::move(c));
    p.secondary = p.cost.has_secondary();
    out.push_back({std::move(name), std::move(p)});
  };
  const auto dirac = DiscreteMeasure::dirac(0);

  const auto s60 = LatticeSpec::symmetric(60);
  add("root N=60 even-wide", s60, dirac, kEvenWide, root_cost(s60));
  add("rost N=60 even-wide", s60, dirac, kEvenWide, rost_cost(s60));
  const auto s40 = LatticeSpec::symmetric(40);
  add("root N=40 spread", s40, dirac, kSpread, root_cost(s40));
  const auto half = LatticeSpec::symmetric(40, 0.5);
  add("root N=40 dx=0.5 skewed", half, dirac, kSkewed, root_cost(half));
  const auto spread_start = LatticeSpec::symmetric(40, 1.0, {}, {-1, 1});
  add("root N=40 two-point start", spread_start, kTwoPoint, kEvenWide, root_cost(spread_start));
  const auto s24 = LatticeSpec::symmetric(24);
  add("rost N=24 skewed h=t-0.05t^2", s24, dirac, kSkewed,
      rost_cost(s24, ScalarFunction::poly({0.0, 1.0, -0.05})));
  add("cave N=24 t0=6 skewed", s24, dirac, kSkewed, cave_cost(s24, 6));
  const auto s30 = LatticeSpec::symmetric(30);
  add("cave N=30 t0=10 spread", s30, dirac, kSpread, cave_cost(s30, 10));
  const auto m24 = LatticeSpec::symmetric(24, 1.0, {true, false, false});
  add("azema-yor N=24 spread", m24, dirac, kSpread, azema_yor_cost(m24));
  const auto mm20 = LatticeSpec::symmetric(20, 1.0, {true, true, false});
  add("jacka N=20 skewed", mm20, dirac, kSkewed, jacka_cost(mm20));
  add("perkins N=20 no-zero", mm20, dirac, kNoZero, perkins_cost(mm20));
  add("range N=20 skewed", mm20, dirac, kSkewed, range_cost(mm20));
  const auto l24 = LatticeSpec::symmetric(24, 1.0, {false, false, true});
  add("vallois-min N=24 spread", l24, dirac, kSpread, vallois_cost(l24));
  add("vallois-max N=24 skewed", l24, dirac, kSkewed,
      vallois_cost(l24, ScalarFunction("sqrt"), Direction::Maximize));
  return out;
}

struct Solved {
  const Instance* instance = nullptr;
  std::optional<OptimalSolution> sol;
  std::string error;
};

// Independent check of a Farkas ray y for {A x = b, 0 <= x <= u}.
bool farkas_ok(const StandardFormLP& lp, const std::vector<double>& y, double tol = 1e-9) {
  if (y.size() != lp.rows()) return false;
  double yb = 0.0;
  for (std::size_t i = 0; i < lp.rows(); ++i) yb += y[i] * lp.rhs()[i];
  std::vector<double> aty(lp.cols(), 0.0);
  for (const auto& t : lp.entries()) aty[t.col] += t.value * y[t.row];
  double reach = 0.0;
  for (std::size_t j = 0; j < lp.cols(); ++j) {
    if (std::isfinite(lp.upper()[j])) {
      reach += lp.upper()[j] * std::max(0.0, aty[j]);
    } else if (aty[j] > tol) {
      return false;
    }
  }
  return yb - reach > tol;
}

// Comonotone coupling of two laws by walking their quantile functions.
std::map<std::pair<int, int>, double> quantile_coupling(const DiscreteMeasure& a,
                                                        const DiscreteMeasure& b) {
  std::map<std::pair<int, int>, double> out;
  auto ia = a.atoms().begin();
  auto ib = b.atoms().begin();
  double ra = ia->weight, rb = ib->weight;
  while (ia != a.atoms().end() && ib != b.atoms().end()) {
    const double m = std::min(ra, rb);
    if (m > 0) out[{ia->index, ib->index}] += m;
    ra -= m;
    rb -= m;
    if (ra <= 1e-15 && ++ia != a.atoms().end()) ra = ia->weight;
    if (rb <= 1e-15 && ++ib != b.atoms().end()) rb = ib->weight;
  }
  return out;
}

}  // namespace

int main() {
  const auto t_all = Clock::now();
  const auto instances = battery();

  // Solves are independent, so the battery runs them concurrently.
  std::vector<Solved> solved(instances.size());
  {
    const auto t0 = Clock::now();
    std::vector<std::future<void>> jobs;
    for (std::size_t i = 0; i < instances.size(); ++i) {
      jobs.push_back(std::async(std::launch::async, [&, i] {
        solved[i].instance = &instances[i];
        try {
          solved[i].sol = solve(instances[i].problem);
        } catch (const std::exception& e) {
          solved[i].error = e.what();
        }
      }));
    }
    for (auto& j : jobs) j.get();
    std::fprintf(stderr, "battery: %zu instances solved in %.2fs\n", instances.size(),
                 seconds_since(t0));
  }

  std::vector<Criterion> results;

  {
    Criterion c("embedding and minimality identity");
    for (const auto& s : solved) {
      const auto& name = s.instance->name;
      c.expect(s.sol.has_value(), name + ": solve failed: " + s.error);
      if (!s.sol) continue;
      const auto& p = s.instance->problem;
      const double dev = max_atom_deviation(pushforward_law(s.sol->xi), p.target);
      c.expect(dev <= 1e-9, name + ": pushforward deviation " + fmt("%.3g", dev));
      const double dx = p.spec.step_size;
      const double id = expected_time(s.sol->xi) - (variance(p.target, dx) - variance(p.start, dx));
      c.expect(std::abs(id) <= 1e-9, name + ": E[tau] - variance gap " + fmt("%.3g", id));
    }
    const double t = seconds_since(t_all);
    c.expect(t <= 300.0, "runtime " + fmt("%.1fs", t));
    c.note(std::to_string(solved.size()) + " instances");
    c.note("runtime " + fmt("%.2fs", t));
    results.push_back(c);
  }

  {
    Criterion c("certified optimality");
    double worst = 0.0;
    for (const auto& s : solved) {
      if (!s.sol) {
        c.expect(false, s.instance->name + ": no solution");
        continue;
      }
      const auto r = certificate_check(*s.sol, s.instance->problem);
      const double rel = std::abs(r.primal - r.dual) / (1.0 + std::abs(r.primal));
      worst = std::max(worst, rel);
      c.expect(r.ok, s.instance->name + ": certificate check failed");
      c.expect(rel <= 1e-8, s.instance->name + ": relative gap " + fmt("%.3g", rel));
    }
    c.note("worst relative gap " + fmt("%.2g", worst));
    results.push_back(c);
  }

  {
    Criterion c("path-tree oracle equivalence, N=6");
    const auto t0 = Clock::now();
    const auto spec = LatticeSpec::symmetric(6, 1.0, {true, true, true});
    const auto lam = DiscreteMeasure::dirac(0);
    const std::vector<CostFunctional> costs{
        root_cost(spec), rost_cost(spec), cave_cost(spec, 3), azema_yor_cost(spec),
        jacka_cost(spec), perkins_cost(spec), range_cost(spec), vallois_cost(spec),
        vallois_cost(spec, ScalarFunction("sqrt"), Direction::Maximize)};
    std::mt19937_64 rng(20240601);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    for (const auto& cost : costs) {
      for (int trial = 0; trial < 20; ++trial) {
        // Pushforwards of random rules are feasible targets by construction.
        const bool avoid_zero = cost.name == "perkins";
        // Without mass at 0: never stop there, and stop everything at +-1 one
        // step before the horizon so nothing can end on 0.
        const auto mu = pushforward_law(rule(spec, lam, [&](const AugmentedState& s) {
          if (avoid_zero && s.x == 0) return 0.0;
          if (avoid_zero && s.k == spec.steps - 1 && std::abs(s.x) == 1) return 1.0;
          const double r = u(rng);
          return r < 0.4 ? 0.0 : r < 0.6 ? 1.0 : u(rng);
        }));
        const auto p = make_problem(spec, lam, mu, cost);
        const std::string tag = cost.name + " trial " + std::to_string(trial);
        try {
          const double d = std::abs(solve(p).objective - solve_pathtree_oracle(p).objective);
          worst = std::max(worst, d);
          c.expect(d <= 1e-8, tag + ": difference " + fmt("%.3g", d));
        } catch (const std::exception& e) {
          c.expect(false, tag + ": " + e.what());
        }
      }
    }
    const double t = seconds_since(t0);
    c.expect(t <= 120.0, "runtime " + fmt("%.1fs", t));
    c.note(std::to_string(costs.size()) + " costs x 20 targets");
    c.note("worst difference " + fmt("%.2g", worst));
    c.note("runtime " + fmt("%.2fs", t));
    results.push_back(c);
  }

  {
    Criterion c("structure of optimal supports");
    for (const auto& s : solved) {
      if (!s.sol) {
        c.expect(false, s.instance->name + ": no solution");
        continue;
      }
      const auto& p = s.instance->problem;
      const auto& name = s.instance->name;
      try {
        const auto b = extract_barrier(*s.sol, p);
        c.expect(b.kind() == p.cost.kind, name + ": barrier kind " +
                                              std::string(to_string(b.kind())));
        c.expect(check_thresholds(b).empty(), name + ": threshold monotonicity");
        c.expect(max_fractions_per_level(b) <= 1, name + ": several fractional cells per level");
        const double d = stopped_law_distance(hitting_rst(b, p.spec, p.start), s.sol->xi);
        c.expect(d <= 1e-9, name + ": hitting rule round trip " + fmt("%.3g", d));
        if (b.kind() == BarrierKind::Barrier || b.kind() == BarrierKind::Inverse) {
          const auto r = reverse_time(b);
          c.expect(r.kind() != b.kind() && check_thresholds(r).empty(),
                   name + ": time reversal");
        }
      } catch (const std::exception& e) {
        c.expect(false, name + ": " + e.what());
      }
    }
    results.push_back(c);
  }

  {
    Criterion c("monotonicity principle");
    std::size_t total = 0;
    for (const auto& s : solved) {
      if (!s.sol) {
        c.expect(false, s.instance->name + ": no solution");
        continue;
      }
      const auto v = verify_monotonicity(s.sol->xi, s.instance->problem.cost);
      total += v.size();
      c.expect(v.empty(), s.instance->name + ": " + std::to_string(v.size()) + " violations");
    }
    c.note(std::to_string(total) + " violations on optimizers");

    // Adversarial fixtures: embeddings of the right target that are strictly
    // worse than the optimum for the cost they are checked against.
    struct Fixture {
      std::string name;
      RandomizedStoppingTime xi;
      EmbeddingProblem problem;
    };
    std::vector<Fixture> fixtures;
    const auto dirac = DiscreteMeasure::dirac(0);
    const auto s8 = LatticeSpec::symmetric(8);
    const auto m8 = LatticeSpec::symmetric(8, 1.0, {true, false, false});
    const auto root8 = make_problem(s8, dirac, kSkewed, root_cost(s8));
    const auto rost8 = make_problem(s8, dirac, kSkewed, rost_cost(s8));
    const auto ay8 = make_problem(m8, dirac, kSkewed, azema_yor_cost(m8));
    const auto rost_m8 = make_problem(m8, dirac, kSkewed, rost_cost(m8));
    fixtures.push_back({"rost optimizer under root", solve(rost8).xi, root8});
    fixtures.push_back({"root optimizer under rost", solve(root8).xi, rost8});
    fixtures.push_back({"rost optimizer under azema-yor", solve(rost_m8).xi, ay8});
    // Stops half the mass at (1,1) while mass passing level 1 at time 3 goes on.
    const auto s4 = LatticeSpec::symmetric(4);
    const auto split = rule(s4, dirac, [](const AugmentedState& s) {
      if (s.k == 1 && s.x == 1) return 0.5;
      return s.k == 2 && std::abs(s.x) == 2 ? 1.0 : 0.0;
    });
    fixtures.push_back({"split stop at (1,1) under root", split,
                        make_problem(s4, dirac, pushforward_law(split), root_cost(s4))});
    for (const auto& f : fixtures) {
      const auto best = solve(f.problem).objective;
      const double value = expected_cost(f.xi, f.problem.cost);
      const double excess = value - best;
      c.expect(max_atom_deviation(pushforward_law(f.xi), f.problem.target) <= 1e-9,
               f.name + ": fixture does not embed the target");
      c.expect(excess > 1e-9, f.name + ": fixture is not suboptimal");
      const auto v = verify_monotonicity(f.xi, f.problem.cost);
      c.expect(!v.empty(), f.name + ": no violation found");
      c.note(f.name + " " + std::to_string(v.size()));
    }
    results.push_back(c);
  }

  {
    Criterion c("closed-form values");
    for (double dx : {1.0, 0.5}) {
      const auto s3 = LatticeSpec::symmetric(3, dx);
      const auto a = solve(make_problem(s3, DiscreteMeasure::dirac(0), kTwoPoint, root_cost(s3)));
      const double dt = s3.time_step;
      c.expect(std::abs(a.objective - dt * dt) <= 1e-9,
               "two-point root dx=" + fmt("%g", dx) + ": " + fmt("%.12g", a.objective));
      const auto& g = a.xi.graph();
      const double at_one = a.xi.stopped(g.index_of(st(1, -1))) + a.xi.stopped(g.index_of(st(1, 1)));
      c.expect(std::abs(at_one - 1.0) <= 1e-9, "two-point root stops at time 1");

      const auto s4 = LatticeSpec::symmetric(4, dx);
      const auto b = solve(make_problem(s4, DiscreteMeasure::dirac(0), kThreePoint, root_cost(s4)));
      c.expect(std::abs(b.objective - 4 * dt * dt) <= 1e-9,
               "three-point root dx=" + fmt("%g", dx) + ": " + fmt("%.12g", b.objective));
      double at_two = 0.0;
      for (int x : {-2, 0, 2}) at_two += b.xi.stopped(b.xi.graph().index_of(st(2, x)));
      c.expect(std::abs(at_two - 1.0) <= 1e-9, "three-point root stops at time 2");

      const auto m3 = LatticeSpec::symmetric(3, dx, {true, false, false});
      const auto y = solve(make_problem(m3, DiscreteMeasure::dirac(0), kTwoPoint,
                                        azema_yor_cost(m3)));
      // The cost is the negated maximum, minimized.
      c.expect(std::abs(-y.objective - 0.5 * dx) <= 1e-9,
               "azema-yor E[max] dx=" + fmt("%g", dx) + ": " + fmt("%.12g", -y.objective));
    }
    results.push_back(c);
  }

  {
    Criterion c("Hoeffding-Frechet on the drift kernel");
    LatticeSpec spec;
    spec.steps = 5;
    spec.kernel = Kernel::Drift;
    spec.start_support = {0, 1};
    const DiscreteMeasure lam({{0, 0.5}, {1, 0.5}});
    const DiscreteMeasure mu({{2, 0.5}, {5, 0.5}});
    const auto sol = solve(make_problem(spec, lam, mu, root_cost(spec)));
    c.expect(std::abs(sol.objective - 10.0) <= 1e-9, "objective " + fmt("%.12g", sol.objective));
    const auto coupling = induced_coupling(sol.xi);
    const auto oracle = quantile_coupling(lam, mu);
    double worst = 0.0;
    for (std::size_t i = 0; i < coupling.start_levels.size(); ++i) {
      for (std::size_t j = 0; j < coupling.end_levels.size(); ++j) {
        const auto it = oracle.find({coupling.start_levels[i], coupling.end_levels[j]});
        const double want = it == oracle.end() ? 0.0 : it->second;
        worst = std::max(worst, std::abs(coupling.mass[i][j] - want));
      }
    }
    double covered = 0.0;
    for (const auto& [key, m] : oracle) covered += m;
    c.expect(std::abs(covered - 1.0) <= 1e-12, "quantile oracle mass");
    c.expect(worst <= 1e-12, "coupling differs from the quantile coupling by " + fmt("%.3g", worst));
    results.push_back(c);
  }

  {
    Criterion c("Loynes uniqueness across root costs");
    const auto dirac = DiscreteMeasure::dirac(0);
    const std::vector<std::pair<LatticeSpec, DiscreteMeasure>> cases{
        {LatticeSpec::symmetric(4), kThreePoint},
        {LatticeSpec::symmetric(24), kSkewed},
        {LatticeSpec::symmetric(30), kSpread},
        {LatticeSpec::symmetric(40), kEvenWide}};
    double worst = 0.0;
    for (const auto& [spec, mu] : cases) {
      const auto p2 = make_problem(spec, dirac, mu, root_cost(spec));
      const auto p3 =
          make_problem(spec, dirac, mu, root_cost(spec, ScalarFunction::poly({0, 0, 1, 0.1})));
      const auto a = solve(p2);
      const auto b = solve(p3);
      const double d = stopped_law_distance(a.xi, b.xi);
      worst = std::max(worst, d);
      const std::string tag = "N=" + std::to_string(spec.steps);
      c.expect(d <= 1e-8, tag + ": stopped laws differ by " + fmt("%.3g", d));
      c.expect(loynes_compare(extract_barrier(a, p2), extract_barrier(b, p3), spec, dirac),
               tag + ": barriers are not equivalent");
    }
    c.note(std::to_string(cases.size()) + " instances");
    c.note("worst distance " + fmt("%.2g", worst));
    results.push_back(c);
  }

  {
    Criterion c("Monte Carlo embedding check, n=1e5");
    const auto t0 = Clock::now();
    const std::uint64_t seed = 20240601;
    std::size_t used = 0;
    for (const auto& s : solved) {
      if (!s.sol) continue;
      const auto& p = s.instance->problem;
      const auto& name = s.instance->name;
      const auto r1 = verify_embedding(s.sol->xi, p.target, 100000, seed, std::nullopt, 1, &p.cost);
      c.expect(r1.passed && r1.kolmogorov <= 0.01,
               name + ": Kolmogorov distance " + fmt("%.4g", r1.kolmogorov));
      const nlohmann::json base = r1;
      for (unsigned w : {2u, 8u}) {
        nlohmann::json j = verify_embedding(s.sol->xi, p.target, 100000, seed, std::nullopt, w,
                                            &p.cost);
        j["workers"] = 1;
        c.expect(j == base, name + ": report differs with " + std::to_string(w) + " workers");
      }
      const double exact = expected_cost(s.sol->xi, p.cost);
      c.expect(std::abs(r1.cost->mean - exact) <= 4 * r1.cost->half_width,
               name + ": cost estimate off by " + fmt("%.3g", r1.cost->mean - exact));
      ++used;
    }
    const double t = seconds_since(t0);
    c.expect(used >= 5, "fewer than 5 instances");
    c.expect(t <= 60.0, "runtime " + fmt("%.1fs", t));
    c.note(std::to_string(used) + " instances x 3 worker counts");
    c.note("runtime " + fmt("%.2fs", t));
    results.push_back(c);
  }

  {
    Criterion c("infeasibility with a Farkas certificate");
    const auto spec = LatticeSpec::symmetric(6);
    const auto p = make_problem(spec, DiscreteMeasure::dirac(0),
                                DiscreteMeasure({{-2, 0.5}, {2, 0.5}}), root_cost(spec));
    auto lp = assemble_lp(p, enumerate_reachable(spec, p.start));
    lp.finalize();
    try {
      solve(p);
      c.expect(false, "solve returned a solution");
    } catch (const InfeasibleError& e) {
      c.expect(e.verified(), "solver did not verify its own ray");
      c.expect(farkas_ok(lp, e.farkas()), "ray fails the independent check");
    }
    const auto f = feasibility_check(p);
    c.expect(!f.feasible && farkas_ok(lp, f.farkas), "feasibility_check ray");
    results.push_back(c);
  }

  bool all = true;
  for (std::size_t i = 0; i < results.size(); ++i) {
    results[i].print(static_cast<int>(i + 1));
    all = all && results[i].passed();
  }
  std::printf("total runtime %.2fs\n", seconds_since(t_all));
  return all ? 0 : 1;
}
