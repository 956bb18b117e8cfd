#include "skembed/barriers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <sstream>

#include <nlohmann/json.hpp>

namespace skembed {

namespace {

std::size_t arity(Phase phase) {
  return phase == Phase::MaxMin || phase == Phase::MinMaxSpace ? 2 : 1;
}

bool cell_less(const BarrierCell& a, const BarrierCell& b) {
  return std::tie(a.level, a.coords) < std::tie(b.level, b.coords);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  std::string s = buf;
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

const char* coordinate_name(Phase phase) {
  switch (phase) {
    case Phase::TimeSpace: return "t";
    case Phase::MaxSpace: return "max";
    case Phase::AbsMaxSpace: return "absmax";
    case Phase::LocalTimeSpace: return "L";
    case Phase::MaxMin: return "max;min";
    case Phase::MinMaxSpace: return "min;max";
  }
  return "?";
}

double physical(const PhaseBarrier& b, int c) {
  return b.phase() == Phase::TimeSpace ? c * b.time_step() : c * b.step_size();
}

LatticeSpec spec_of(const PhaseBarrier& b) {
  LatticeSpec sp;
  sp.steps = b.steps();
  sp.step_size = b.step_size();
  sp.time_step = b.time_step();
  return sp;
}

const char* cave_region(const PhaseBarrier& b, const BarrierCell& c) {
  return c.coords[0] < b.pivot() ? "pre-t0" : "post-t0";
}

bool fractional(double p, double tol) { return p > tol && p < 1.0 - tol; }

}  // namespace

AugmentedState cell_state(Phase phase, int level, const std::vector<int>& coords) {
  if (coords.size() != arity(phase)) {
    throw InvalidArgument("phase point of the wrong size for " + std::string(to_string(phase)));
  }
  AugmentedState s;
  s.x = level;
  switch (phase) {
    case Phase::TimeSpace: s.k = coords[0]; break;
    case Phase::MaxSpace: s.max = coords[0]; break;
    case Phase::AbsMaxSpace:
      s.max = coords[0];
      s.min = -coords[0];
      break;
    case Phase::LocalTimeSpace: s.zero_visits = coords[0]; break;
    case Phase::MaxMin:
      s.max = coords[0];
      s.min = coords[1];
      break;
    case Phase::MinMaxSpace:
      s.min = coords[0];
      s.max = coords[1];
      break;
  }
  return s;
}

PhaseBarrier::PhaseBarrier(CostFunctional cost, const LatticeSpec& spec,
                           std::vector<BarrierCell> cells, std::vector<StopOverride> overrides)
    : cost_(std::move(cost)), steps_(spec.steps), step_size_(spec.step_size),
      time_step_(spec.time_step), cells_(std::move(cells)), overrides_(std::move(overrides)) {
  if (!cost_.dominates) throw InvalidArgument("barrier cost has no stop-go order");
  for (const auto& c : cells_) {
    if (c.coords.size() != arity(cost_.phase)) {
      throw InvalidArgument("barrier cell with a phase point of the wrong size");
    }
    if (!(c.fraction >= 0.0 && c.fraction <= 1.0)) {
      throw InvalidArgument("barrier cell fraction outside [0,1]");
    }
  }
  std::sort(cells_.begin(), cells_.end(), cell_less);
  std::sort(overrides_.begin(), overrides_.end(),
            [](const StopOverride& a, const StopOverride& b) { return a.state < b.state; });
  for (const auto& o : overrides_) {
    if (!(o.p >= 0.0 && o.p <= 1.0)) throw InvalidArgument("override outside [0,1]");
    if (!override_p_.emplace(o.state, o.p).second) {
      throw InvalidArgument("duplicate override for state " + state_key(o.state));
    }
  }
}

std::vector<BarrierCell> PhaseBarrier::cells_at(int level) const {
  std::vector<BarrierCell> out;
  for (const auto& c : cells_) {
    if (c.level == level) out.push_back(c);
  }
  return out;
}

bool PhaseBarrier::interior(const AugmentedState& s) const {
  for (const auto& c : cells_) {
    if (c.level == s.x && cost_.dominates(s, cell_state(cost_.phase, c.level, c.coords))) {
      return true;
    }
  }
  return false;
}

const BarrierCell* PhaseBarrier::cell_of(const AugmentedState& s) const {
  const auto pp = cost_.phase_point(s);
  for (const auto& c : cells_) {
    if (c.level == s.x && c.coords == pp) return &c;
  }
  return nullptr;
}

bool PhaseBarrier::contains(const AugmentedState& s) const {
  return cell_of(s) != nullptr || interior(s);
}

std::optional<int> PhaseBarrier::threshold(int level, bool post) const {
  if (arity(cost_.phase) != 1) throw InvalidArgument("threshold() needs a one-coordinate phase");
  for (const auto& c : cells_) {
    if (c.level != level) continue;
    if (cost_.kind == BarrierKind::Cave && (c.coords[0] >= cost_.pivot) != post &&
        c.coords[0] != cost_.pivot) {
      continue;
    }
    return c.coords[0];
  }
  return std::nullopt;
}

double PhaseBarrier::stop_probability(const AugmentedState& s) const {
  if (auto it = override_p_.find(s); it != override_p_.end()) return it->second;
  if (interior(s)) return 1.0;
  if (const auto* c = cell_of(s)) return c->fraction;
  return 0.0;
}

PhaseBarrier extract_barrier(const OptimalSolution& sol, const EmbeddingProblem& problem,
                             double tol) {
  return extract_barrier(sol.xi, problem.cost, tol);
}

PhaseBarrier extract_barrier(const RandomizedStoppingTime& xi, const CostFunctional& cost,
                             double tol) {
  const auto& g = xi.graph();
  const auto& spec = g.spec();
  cost.check_features(spec);
  const int horizon = spec.steps;
  const auto latest = latest_stop_time(xi, tol);

  std::map<int, std::vector<std::size_t>> going;
  for (std::size_t s = 0; s < g.size(); ++s) {
    if (!g.is_terminal(s) && xi.continuing(s) > tol) going[g.state(s).x].push_back(s);
  }

  std::vector<StopOverride> overrides;
  std::vector<bool> horizon_stop(g.size(), false);
  std::map<std::pair<int, std::vector<int>>, bool> structural;
  for (std::size_t b = 0; b < g.size(); ++b) {
    if (xi.stopped(b) <= tol) continue;
    const auto& sb = g.state(b);
    bool dominated = false;
    if (auto it = going.find(sb.x); it != going.end()) {
      for (std::size_t a : it->second) {
        const auto& sa = g.state(a);
        if (!cost.dominates(sa, sb)) continue;
        if (sb.k + (latest[a] - sa.k) <= horizon) {
          throw BarrierKindError(sb.x, "going state " + state_key(sa) +
                                           " lies beyond stopped state " + state_key(sb));
        }
        dominated = true;
      }
    }
    if (dominated) {
      horizon_stop[b] = true;
      overrides.push_back({sb, xi.stop_prob(b), StopOverride::Reason::Horizon});
    } else {
      structural[{sb.x, cost.phase_point(sb)}] = true;
    }
  }

  // Generators: structural cells not strictly beyond another one.
  std::map<std::pair<int, std::vector<int>>, std::pair<double, double>> cells;
  for (const auto& [key, unused] : structural) {
    const auto probe = cell_state(cost.phase, key.first, key.second);
    bool inner = false;
    for (const auto& [other, unused2] : structural) {
      if (other.first == key.first && other != key &&
          cost.dominates(probe, cell_state(cost.phase, other.first, other.second))) {
        inner = true;
        break;
      }
    }
    if (!inner) cells[key] = {0.0, 0.0};
  }

  std::map<std::pair<int, std::vector<int>>, std::vector<std::size_t>> members;
  for (std::size_t s = 0; s < g.size(); ++s) {
    if (horizon_stop[s]) continue;
    std::pair<int, std::vector<int>> key{g.state(s).x, cost.phase_point(g.state(s))};
    auto it = cells.find(key);
    if (it == cells.end()) continue;
    it->second.first += xi.stopped(s);
    it->second.second += xi.arrival(s);
    if (xi.arrival(s) > tol) members[key].push_back(s);
  }

  std::vector<BarrierCell> out;
  for (const auto& [key, mass] : cells) {
    BarrierCell c{key.first, key.second, 1.0};
    if (mass.second > 0.0) c.fraction = std::clamp(mass.first / mass.second, 0.0, 1.0);
    for (std::size_t s : members[key]) {
      if (g.is_terminal(s)) continue;
      if (std::abs(xi.stop_prob(s) - c.fraction) > 1e-12) {
        overrides.push_back({g.state(s), xi.stop_prob(s), StopOverride::Reason::Boundary});
      }
    }
    out.push_back(std::move(c));
  }

  PhaseBarrier barrier(cost, spec, std::move(out), std::move(overrides));
  const auto failures = check_thresholds(barrier);
  if (!failures.empty()) throw BarrierKindError(failures.front().level, failures.front().what);
  return barrier;
}

std::vector<ThresholdFailure> check_thresholds(const PhaseBarrier& b) {
  std::vector<ThresholdFailure> fails;
  const auto& cells = b.cells();
  if (cells.empty()) return fails;
  const Phase phase = b.phase();
  const BarrierKind kind = b.kind();
  const int n = b.steps();

  std::map<int, std::vector<const BarrierCell*>> by_level;
  int lo = std::numeric_limits<int>::max(), hi = std::numeric_limits<int>::min();
  for (const auto& c : cells) {
    by_level[c.level].push_back(&c);
    lo = std::min(lo, c.level);
    hi = std::max(hi, c.level);
    for (int v : c.coords) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  --lo;
  ++hi;
  auto fail = [&](int level, std::string what) { fails.push_back({level, std::move(what)}); };

  if (phase == Phase::TimeSpace) {
    const int t0 = b.pivot();
    for (const auto& [x, cs] : by_level) {
      if (kind == BarrierKind::Cave) {
        int pre = 0, post = 0, at = 0;
        for (const auto* c : cs) {
          const int k = c->coords[0];
          (k < t0 ? pre : k > t0 ? post : at) += 1;
        }
        if (pre > 1 || post > 1 || (at > 0 && pre + post > 0)) {
          fail(x, "more than one threshold on a side of the pivot");
        }
      } else if (cs.size() > 1) {
        fail(x, "more than one threshold");
      }
      for (int k = 0; k < n; ++k) {
        const bool here = b.contains(cell_state(phase, x, {k}));
        const bool next = b.contains(cell_state(phase, x, {k + 1}));
        bool forward = kind == BarrierKind::Barrier ||
                       (kind == BarrierKind::Cave && k >= t0);
        if (forward ? (here && !next) : (!here && next)) {
          fail(x, "region not " + std::string(forward ? "right" : "left") +
                      "-complete in time at k=" + std::to_string(k));
        }
      }
    }
    return fails;
  }

  if (phase == Phase::MaxSpace || phase == Phase::AbsMaxSpace ||
      phase == Phase::LocalTimeSpace) {
    for (const auto& [x, cs] : by_level) {
      if (cs.size() > 1) fail(x, "more than one threshold");
    }
    if (!fails.empty()) return fails;
    // Derived functions of the phase coordinate u: the lowest and highest
    // level whose cell admits u, sampled on the grid.
    const bool down = phase == Phase::LocalTimeSpace && kind == BarrierKind::ThresholdIncreasing;
    constexpr int kNone = std::numeric_limits<int>::max();
    auto admits = [&](const BarrierCell* c, int u) {
      return down ? u <= c->coords[0] : c->coords[0] <= u;
    };
    int prev_low = kNone, prev_high = kNone;
    for (int u = std::min(lo, 0); u <= hi; ++u) {
      int low = kNone, high = kNone;  // kNone: no admitted level on that side
      for (const auto& [x, cs] : by_level) {
        if (!admits(cs.front(), u)) continue;
        if (phase == Phase::LocalTimeSpace) {
          if (x > 0 && low == kNone) low = x;  // phi_+(u): smallest positive level
          if (x < 0) high = x;                 // phi_-(u): largest negative level
        } else {
          if (low == kNone) low = x;
          high = x;
        }
      }
      if (u > std::min(lo, 0)) {
        if (phase == Phase::MaxSpace) {
          if (prev_high != kNone && (high == kNone || high < prev_high)) {
            fail(prev_high, "psi decreases at max=" + std::to_string(u));
          }
        } else if (phase == Phase::AbsMaxSpace) {
          if (prev_low != kNone && (low == kNone || low > prev_low)) {
            fail(prev_low, "lower threshold increases at |x|*=" + std::to_string(u));
          }
          if (prev_high != kNone && (high == kNone || high < prev_high)) {
            fail(prev_high, "upper threshold decreases at |x|*=" + std::to_string(u));
          }
        } else {
          // Positive side phi_+ with "none" read as +inf, negative side with
          // "none" read as -inf.
          auto plus = [&](int v) { return v == kNone ? std::numeric_limits<int>::max() : v; };
          auto minus = [&](int v) { return v == kNone ? std::numeric_limits<int>::min() : v; };
          const bool inc = kind == BarrierKind::ThresholdIncreasing;
          if (inc ? plus(low) < plus(prev_low) : plus(low) > plus(prev_low)) {
            fail(low == kNone ? prev_low : low,
                 "phi+ not monotone at L=" + std::to_string(u));
          }
          if (inc ? minus(high) > minus(prev_high) : minus(high) < minus(prev_high)) {
            fail(high == kNone ? prev_high : high,
                 "phi- not monotone at L=" + std::to_string(u));
          }
        }
      }
      prev_low = low;
      prev_high = high;
    }
    return fails;
  }

  if (phase == Phase::MaxMin) {
    for (const auto& c : cells) {
      if (c.level != c.coords[0] && c.level != c.coords[1]) {
        fail(c.level, "stop away from the running max and min");
      }
    }
    constexpr int kLow = std::numeric_limits<int>::min(), kHigh = std::numeric_limits<int>::max();
    // gamma_+(m): highest level stopped at its running min with max >= m.
    int prev = kHigh;
    for (int m = lo; m <= hi; ++m) {
      int v = kLow;
      for (const auto& c : cells) {
        if (c.level == c.coords[1] && c.level != c.coords[0] && c.coords[0] >= m) {
          v = std::max(v, c.level);
        }
      }
      if (v > prev) fail(v, "gamma+ increases at max=" + std::to_string(m));
      prev = v;
    }
    // gamma_-(i): lowest level stopped at its running max with min <= i.
    prev = kHigh;
    for (int i = lo; i <= hi; ++i) {
      int v = kHigh;
      for (const auto& c : cells) {
        if (c.level == c.coords[0] && c.level != c.coords[1] && c.coords[1] <= i) {
          v = std::min(v, c.level);
        }
      }
      if (v > prev) fail(v, "gamma- increases at min=" + std::to_string(i));
      prev = v;
    }
    return fails;
  }

  // Range: I(i,m) is the set of levels in the region with running min i and
  // max m; it must grow with the range.
  auto interval = [&](int i, int m) -> std::optional<std::pair<int, int>> {
    std::optional<std::pair<int, int>> r;
    for (int x = i; x <= m; ++x) {
      if (!b.contains(cell_state(phase, x, {i, m}))) continue;
      if (!r) r = {x, x};
      r->second = x;
    }
    return r;
  };
  for (int i = lo; i <= hi; ++i) {
    for (int m = i; m <= hi; ++m) {
      const auto inner = interval(i, m);
      if (!inner) continue;
      for (const auto& [i2, m2] : {std::pair{i - 1, m}, std::pair{i, m + 1}}) {
        const auto outer = interval(i2, m2);
        if (!outer) continue;
        if (outer->first > inner->first || outer->second < inner->second) {
          fail(inner->first, "stopping interval shrinks from range (" + std::to_string(i) +
                                 "," + std::to_string(m) + ")");
        }
      }
    }
  }
  return fails;
}

int max_fractions_per_level(const PhaseBarrier& b, double tol) {
  std::map<int, int> count;
  std::map<const BarrierCell*, bool> has_override;
  for (const auto& o : b.overrides()) {
    if (o.reason != StopOverride::Reason::Boundary) continue;
    if (const auto* c = b.cell_of(o.state)) has_override[c] = true;
    if (fractional(o.p, tol)) ++count[o.state.x];
  }
  for (const auto& c : b.cells()) {
    if (!has_override.count(&c) && fractional(c.fraction, tol)) ++count[c.level];
  }
  int worst = 0;
  for (const auto& [x, n] : count) worst = std::max(worst, n);
  return worst;
}

RandomizedStoppingTime hitting_rst(const PhaseBarrier& b, const LatticeSpec& spec,
                                   const DiscreteMeasure& lambda) {
  b.cost().check_features(spec);
  auto graph = std::make_shared<const StateGraph>(enumerate_reachable(spec, lambda));
  std::vector<double> p(graph->size(), 1.0);
  for (std::size_t s = 0; s < graph->size(); ++s) {
    if (!graph->is_terminal(s)) p[s] = b.stop_probability(graph->state(s));
  }
  return from_stop_probabilities(std::move(graph), lambda, std::move(p));
}

double stopped_law_distance(const RandomizedStoppingTime& a, const RandomizedStoppingTime& b) {
  const auto& ga = a.graph();
  const auto& gb = b.graph();
  double worst = 0.0;
  for (std::size_t s = 0; s < ga.size(); ++s) {
    const auto t = gb.find(ga.state(s));
    worst = std::max(worst, std::abs(a.stopped(s) - (t ? b.stopped(*t) : 0.0)));
  }
  for (std::size_t t = 0; t < gb.size(); ++t) {
    if (!ga.find(gb.state(t))) worst = std::max(worst, std::abs(b.stopped(t)));
  }
  return worst;
}

bool loynes_compare(const PhaseBarrier& b1, const PhaseBarrier& b2, const LatticeSpec& spec,
                    const DiscreteMeasure& lambda, double tol) {
  if (b1.phase() != b2.phase() || b1.kind() != b2.kind()) {
    throw InvalidArgument("loynes_compare needs barriers of the same phase and kind");
  }
  return stopped_law_distance(hitting_rst(b1, spec, lambda), hitting_rst(b2, spec, lambda)) <=
         tol;
}

PhaseBarrier reverse_time(const PhaseBarrier& b) {
  if (b.phase() != Phase::TimeSpace ||
      (b.kind() != BarrierKind::Barrier && b.kind() != BarrierKind::Inverse)) {
    throw InvalidArgument("reverse_time needs a (t,x) barrier or inverse barrier");
  }
  const auto sp = spec_of(b);
  auto cost = b.kind() == BarrierKind::Barrier ? rost_cost(sp) : root_cost(sp);
  std::vector<BarrierCell> cells = b.cells();
  for (auto& c : cells) c.coords[0] = b.steps() - c.coords[0];
  return PhaseBarrier(std::move(cost), sp, std::move(cells));
}

std::string export_barrier_csv(const PhaseBarrier& b) {
  const bool cave = b.kind() == BarrierKind::Cave;
  std::ostringstream out;
  out << "phase,level,threshold,value,fraction" << (cave ? ",region" : "") << '\n';
  for (const auto& c : b.cells()) {
    std::string idx, val;
    for (std::size_t j = 0; j < c.coords.size(); ++j) {
      if (j) {
        idx += ';';
        val += ';';
      }
      idx += std::to_string(c.coords[j]);
      val += fmt(physical(b, c.coords[j]));
    }
    out << coordinate_name(b.phase()) << ',' << c.level << ',' << idx << ',' << val << ','
        << fmt(c.fraction);
    if (cave) out << ',' << cave_region(b, c);
    out << '\n';
  }
  return out.str();
}

void to_json(nlohmann::json& j, const PhaseBarrier& b) {
  j = nlohmann::json::object();
  j["phase"] = std::string(to_string(b.phase()));
  j["kind"] = std::string(to_string(b.kind()));
  if (b.kind() == BarrierKind::Cave) j["pivot"] = b.pivot();
  j["cost"] = b.cost().params;
  j["steps"] = b.steps();
  j["step_size"] = b.step_size();
  j["time_step"] = b.time_step();
  auto cells = nlohmann::json::array();
  for (const auto& c : b.cells()) {
    nlohmann::json row = {{"level", c.level}, {"threshold", c.coords}, {"fraction", c.fraction}};
    auto values = nlohmann::json::array();
    for (int v : c.coords) values.push_back(physical(b, v));
    row["value"] = values;
    if (b.kind() == BarrierKind::Cave) row["region"] = cave_region(b, c);
    cells.push_back(std::move(row));
  }
  j["cells"] = std::move(cells);
  auto overrides = nlohmann::json::array();
  for (const auto& o : b.overrides()) {
    overrides.push_back({state_key(o.state), o.p,
                         o.reason == StopOverride::Reason::Horizon ? "horizon" : "boundary"});
  }
  j["overrides"] = std::move(overrides);
}

}  // namespace skembed
