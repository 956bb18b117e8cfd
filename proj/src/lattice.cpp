#include "skembed/lattice.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <set>

#include "skembed/error.hpp"

namespace skembed {

std::string_view to_string(Kernel kernel) {
  switch (kernel) {
    case Kernel::Symmetric: return "symmetric";
    case Kernel::Drift: return "drift";
    case Kernel::Custom: return "custom";
  }
  return "unknown";
}

Kernel kernel_from_string(std::string_view name) {
  if (name == "symmetric") return Kernel::Symmetric;
  if (name == "drift") return Kernel::Drift;
  if (name == "custom") return Kernel::Custom;
  throw InvalidArgument("unknown kernel '" + std::string(name) + "'");
}

LatticeSpec LatticeSpec::symmetric(int steps, double step_size,
                                   TrackedFeatures tracked,
                                   std::vector<int> start_support) {
  LatticeSpec spec;
  spec.steps = steps;
  spec.step_size = step_size;
  spec.time_step = step_size * step_size;
  spec.kernel = Kernel::Symmetric;
  spec.tracked = tracked;
  spec.start_support = std::move(start_support);
  return spec;
}

void LatticeSpec::validate() const {
  if (steps < 0) throw InvalidArgument("horizon must be non-negative");
  if (!(step_size > 0.0) || !std::isfinite(step_size)) {
    throw InvalidArgument("step_size must be positive");
  }
  if (!(time_step > 0.0) || !std::isfinite(time_step)) {
    throw InvalidArgument("time_step must be positive");
  }
  if (kernel == Kernel::Custom && !(p_up >= 0.0 && p_up <= 1.0)) {
    throw InvalidArgument("p_up must lie in [0,1]");
  }
  if (kernel == Kernel::Symmetric &&
      std::abs(time_step - step_size * step_size) >
          1e-12 * std::max(1.0, time_step)) {
    throw InvalidArgument("symmetric kernel requires time_step = step_size^2");
  }
}

bool LatticeSpec::is_martingale() const {
  return kernel == Kernel::Symmetric || (kernel == Kernel::Custom && p_up == 0.5);
}

AugmentedState start_state(const LatticeSpec& spec, int x) {
  AugmentedState s;
  s.k = 0;
  s.x = x;
  if (spec.tracked.max) s.max = x;
  if (spec.tracked.min) s.min = x;
  if (spec.tracked.zero_visits) s.zero_visits = 0;
  return s;
}

std::string state_key(const AugmentedState& s) {
  std::string key = std::to_string(s.k) + ":" + std::to_string(s.x);
  if (s.max) key += ":" + std::to_string(*s.max);
  if (s.min) key += ":" + std::to_string(*s.min);
  if (s.zero_visits) key += ":" + std::to_string(*s.zero_visits);
  return key;
}

AugmentedState parse_state_key(const LatticeSpec& spec, std::string_view key) {
  std::vector<int> fields;
  std::size_t pos = 0;
  while (pos <= key.size()) {
    const auto next = std::min(key.find(':', pos), key.size());
    int value = 0;
    const auto* first = key.data() + pos;
    const auto* last = key.data() + next;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last || first == last) {
      throw InvalidArgument("malformed state key '" + std::string(key) + "'");
    }
    fields.push_back(value);
    pos = next + 1;
  }
  const std::size_t expected = 2 + static_cast<std::size_t>(spec.tracked.max) +
                               static_cast<std::size_t>(spec.tracked.min) +
                               static_cast<std::size_t>(spec.tracked.zero_visits);
  if (fields.size() != expected) {
    throw InvalidArgument("state key '" + std::string(key) +
                          "' does not match the tracked features");
  }
  AugmentedState s;
  s.k = fields[0];
  s.x = fields[1];
  std::size_t n = 2;
  if (spec.tracked.max) s.max = fields[n++];
  if (spec.tracked.min) s.min = fields[n++];
  if (spec.tracked.zero_visits) s.zero_visits = fields[n++];
  return s;
}

namespace {

AugmentedState advance(const AugmentedState& s, int step) {
  AugmentedState c = s;
  c.k = s.k + 1;
  c.x = s.x + step;
  if (c.max) c.max = std::max(*s.max, c.x);
  if (c.min) c.min = std::min(*s.min, c.x);
  if (c.zero_visits) c.zero_visits = *s.zero_visits + (s.x == 0 ? 1 : 0);
  return c;
}

}  // namespace

std::vector<std::pair<AugmentedState, double>> child_states(
    const LatticeSpec& spec, const AugmentedState& s) {
  std::vector<std::pair<AugmentedState, double>> out;
  if (s.k >= spec.steps) return out;
  switch (spec.kernel) {
    case Kernel::Symmetric:
      out.emplace_back(advance(s, +1), 0.5);
      out.emplace_back(advance(s, -1), 0.5);
      break;
    case Kernel::Drift:
      out.emplace_back(advance(s, +1), 1.0);
      break;
    case Kernel::Custom:
      if (spec.p_up > 0.0) out.emplace_back(advance(s, +1), spec.p_up);
      if (spec.p_up < 1.0) out.emplace_back(advance(s, -1), 1.0 - spec.p_up);
      break;
  }
  return out;
}

AugmentedState path_prefix_state(const LatticeSpec& spec,
                                 std::span<const int> prefix) {
  if (prefix.empty()) throw InvalidArgument("empty path prefix");
  if (static_cast<int>(prefix.size()) - 1 > spec.steps) {
    throw InvalidArgument("path prefix longer than the horizon");
  }
  AugmentedState s = start_state(spec, prefix[0]);
  for (std::size_t n = 1; n < prefix.size(); ++n) {
    const int step = prefix[n] - prefix[n - 1];
    bool allowed = false;
    for (const auto& [child, prob] : child_states(spec, s)) {
      if (child.x == prefix[n] && prob > 0.0) {
        s = child;
        allowed = true;
        break;
      }
    }
    if (!allowed) {
      throw InvalidArgument("invalid lattice step " + std::to_string(step) +
                            " at position " + std::to_string(n));
    }
  }
  return s;
}

std::optional<std::size_t> StateGraph::find(const AugmentedState& s) const {
  auto it = std::lower_bound(states_.begin(), states_.end(), s);
  if (it == states_.end() || *it != s) return std::nullopt;
  return static_cast<std::size_t>(it - states_.begin());
}

std::size_t StateGraph::index_of(const AugmentedState& s) const {
  if (auto idx = find(s)) return *idx;
  throw InvalidArgument("state " + state_key(s) + " is not reachable");
}

std::vector<int> StateGraph::levels() const {
  std::set<int> levels;
  for (const auto& s : states_) levels.insert(s.x);
  return {levels.begin(), levels.end()};
}

StateGraph StateGraph::build(const LatticeSpec& spec,
                             std::vector<AugmentedState> roots,
                             std::size_t state_cap) {
  spec.validate();
  StateGraph g;
  g.spec_ = spec;

  std::set<AugmentedState> layer(roots.begin(), roots.end());
  for (const auto& r : layer) {
    if (r.k != 0) throw InvalidArgument("graph roots must sit at time 0");
  }
  std::vector<std::vector<std::pair<AugmentedState, double>>> kids;
  g.layer_offsets_.push_back(0);
  for (int k = 0; k <= spec.steps; ++k) {
    std::set<AugmentedState> next;
    for (const auto& s : layer) {
      g.states_.push_back(s);
      kids.push_back(child_states(spec, s));
      for (const auto& [c, p] : kids.back()) next.insert(c);
    }
    if (g.states_.size() > state_cap) {
      throw ResourceError("state count exceeds cap of " +
                          std::to_string(state_cap) + " at time " +
                          std::to_string(k));
    }
    g.layer_offsets_.push_back(g.states_.size());
    layer = std::move(next);
  }

  const std::size_t n = g.states_.size();
  g.child_offsets_.assign(n + 1, 0);
  std::vector<std::size_t> parent_count(n, 0);
  for (std::size_t s = 0; s < n; ++s) {
    for (const auto& [c, p] : kids[s]) {
      const std::size_t t = g.index_of(c);
      g.child_edges_.push_back({t, p});
      ++parent_count[t];
    }
    g.child_offsets_[s + 1] = g.child_edges_.size();
  }
  g.parent_offsets_.assign(n + 1, 0);
  for (std::size_t s = 0; s < n; ++s) {
    g.parent_offsets_[s + 1] = g.parent_offsets_[s] + parent_count[s];
  }
  g.parent_edges_.resize(g.parent_offsets_[n]);
  std::vector<std::size_t> fill(g.parent_offsets_.begin(),
                                g.parent_offsets_.end() - 1);
  for (std::size_t s = 0; s < n; ++s) {
    for (const auto& e : g.children(s)) {
      g.parent_edges_[fill[e.target]++] = {s, e.prob};
    }
  }
  for (std::size_t s = g.layer_offsets_[0]; s < g.layer_offsets_[1]; ++s) {
    g.roots_.push_back(s);
  }
  return g;
}

StateGraph enumerate_reachable(const LatticeSpec& spec,
                               const DiscreteMeasure& lambda,
                               std::size_t state_cap) {
  if (lambda.empty()) throw InvalidArgument("starting law is empty");
  std::vector<AugmentedState> roots;
  for (const auto& a : lambda.atoms()) {
    if (std::find(spec.start_support.begin(), spec.start_support.end(),
                  a.index) == spec.start_support.end()) {
      throw InvalidArgument("starting law charges level " +
                            std::to_string(a.index) +
                            " outside the lattice start support");
    }
    roots.push_back(start_state(spec, a.index));
  }
  return StateGraph::build(spec, std::move(roots), state_cap);
}

}  // namespace skembed
