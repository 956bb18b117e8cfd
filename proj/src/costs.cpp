#include "skembed/costs.hpp"

#include <algorithm>
#include <cmath>

#include "skembed/error.hpp"

namespace skembed {

ScalarFunction::ScalarFunction(std::string name) : name_(std::move(name)) {
  static const std::vector<std::string> known = {
      "t", "t^2", "t^3", "sqrt", "exp-decay", "saturating"};
  if (std::find(known.begin(), known.end(), name_) == known.end()) {
    throw InvalidArgument("unknown function '" + name_ + "'");
  }
}

ScalarFunction ScalarFunction::poly(std::vector<double> coeffs) {
  ScalarFunction f;
  f.name_ = "poly";
  f.params_ = std::move(coeffs);
  return f;
}

ScalarFunction ScalarFunction::piecewise_cave(double t0) {
  if (!(t0 > 0.0)) throw InvalidArgument("cave pivot must be positive");
  ScalarFunction f;
  f.name_ = "piecewise-cave";
  f.params_ = {t0};
  return f;
}

ScalarFunction ScalarFunction::table(std::vector<double> values, double unit) {
  if (values.empty() || !(unit > 0.0)) {
    throw InvalidArgument("table needs values and a positive unit");
  }
  ScalarFunction f;
  f.name_ = "table";
  f.params_ = std::move(values);
  f.unit_ = unit;
  return f;
}

double ScalarFunction::operator()(double t) const {
  if (name_ == "t") return t;
  if (name_ == "t^2") return t * t;
  if (name_ == "t^3") return t * t * t;
  if (name_ == "sqrt") return std::sqrt(std::max(t, 0.0));
  if (name_ == "exp-decay") return std::exp(-t);
  if (name_ == "saturating") return 1.0 - std::exp2(-t - 1.0);
  if (name_ == "poly") {
    double acc = 0.0;
    for (auto it = params_.rbegin(); it != params_.rend(); ++it) acc = acc * t + *it;
    return acc;
  }
  if (name_ == "piecewise-cave") {
    const double t0 = params_[0];
    if (t <= t0) {
      const double u = t / t0;
      return u * (2.0 - u);
    }
    return std::exp(-(t - t0));
  }
  if (name_ == "table") {
    const double pos = t / unit_;
    const long n = std::lround(pos);
    if (std::abs(pos - static_cast<double>(n)) > 1e-9 || n < 0 ||
        n >= static_cast<long>(params_.size())) {
      throw InvalidArgument("table function evaluated off its grid");
    }
    return params_[static_cast<std::size_t>(n)];
  }
  throw InvalidArgument("unknown function '" + name_ + "'");
}

nlohmann::json ScalarFunction::to_json() const {
  if (name_ == "poly") return {{"poly", params_}};
  if (name_ == "piecewise-cave") return {{"piecewise-cave", params_[0]}};
  if (name_ == "table") return {{"table", params_}, {"unit", unit_}};
  return name_;
}

ScalarFunction ScalarFunction::from_json(const nlohmann::json& j) {
  if (j.is_string()) return ScalarFunction(j.get<std::string>());
  if (j.is_object()) {
    if (j.contains("poly")) return poly(j.at("poly").get<std::vector<double>>());
    if (j.contains("piecewise-cave")) {
      return piecewise_cave(j.at("piecewise-cave").get<double>());
    }
    if (j.contains("table")) {
      return table(j.at("table").get<std::vector<double>>(), j.value("unit", 1.0));
    }
  }
  throw InvalidArgument("unsupported function expression " + j.dump());
}

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::TimeSpace: return "t,x";
    case Phase::MaxSpace: return "max,x";
    case Phase::AbsMaxSpace: return "absmax,x";
    case Phase::LocalTimeSpace: return "L,x";
    case Phase::MaxMin: return "max,min";
    case Phase::MinMaxSpace: return "min,max,x";
  }
  return "?";
}

std::string_view to_string(BarrierKind kind) {
  switch (kind) {
    case BarrierKind::Barrier: return "barrier";
    case BarrierKind::Inverse: return "inverse";
    case BarrierKind::Cave: return "cave";
    case BarrierKind::ThresholdIncreasing: return "threshold-increasing";
    case BarrierKind::ThresholdDecreasing: return "threshold-decreasing";
    case BarrierKind::TwoSided: return "two-sided";
  }
  return "?";
}

namespace {

constexpr double kShapeTolerance = 1e-12;

int max_of(const AugmentedState& s) {
  if (!s.max) throw FeatureError("max", "state " + state_key(s) + " has no running max");
  return *s.max;
}
int min_of(const AugmentedState& s) {
  if (!s.min) throw FeatureError("min", "state " + state_key(s) + " has no running min");
  return *s.min;
}
int visits_of(const AugmentedState& s) {
  if (!s.zero_visits) {
    throw FeatureError("zero_visits", "state " + state_key(s) + " has no visit count");
  }
  return *s.zero_visits;
}
int absmax_of(const AugmentedState& s) {
  return std::max(std::abs(max_of(s)), std::abs(min_of(s)));
}

std::vector<double> grid_values(const ScalarFunction& f, int first, int last,
                                double unit) {
  std::vector<double> v;
  for (int n = first; n <= last; ++n) v.push_back(f(n * unit));
  return v;
}

// Sign of second differences on [first, last]: +1 all >= -tol (convex),
// -1 all <= tol (concave); strict variants demand the inequality by tol.
bool convex_on(const std::vector<double>& v, bool strict) {
  for (std::size_t n = 1; n + 1 < v.size(); ++n) {
    const double d2 = v[n + 1] - 2.0 * v[n] + v[n - 1];
    const double scale = std::max({1.0, std::abs(v[n - 1]), std::abs(v[n + 1])});
    if (strict ? d2 <= kShapeTolerance * scale : d2 < -kShapeTolerance * scale) {
      return false;
    }
  }
  return true;
}

std::vector<double> negated(std::vector<double> v) {
  for (auto& x : v) x = -x;
  return v;
}

TrackedFeatures needs(bool max, bool min, bool visits) {
  TrackedFeatures f;
  f.max = max;
  f.min = min;
  f.zero_visits = visits;
  return f;
}

double pos(const AugmentedState& s, const LatticeSpec& spec) {
  return s.x * spec.step_size;
}

}  // namespace

void CostFunctional::check_features(const LatticeSpec& spec) const {
  if (required.max && !spec.tracked.max) {
    throw FeatureError("max", "cost '" + name + "' requires the running max");
  }
  if (required.min && !spec.tracked.min) {
    throw FeatureError("min", "cost '" + name + "' requires the running min");
  }
  if (required.zero_visits && !spec.tracked.zero_visits) {
    throw FeatureError("zero_visits",
                       "cost '" + name + "' requires the zero-visit count");
  }
}

double CostFunctional::evaluate(const AugmentedState& s,
                                const LatticeSpec& spec) const {
  return primary(s, spec);
}

double CostFunctional::evaluate_secondary(const AugmentedState& s,
                                          const LatticeSpec& spec) const {
  if (!secondary) throw InvalidArgument("cost '" + name + "' has no secondary cost");
  return secondary(s, spec);
}

std::vector<int> CostFunctional::phase_point(const AugmentedState& s) const {
  switch (phase) {
    case Phase::TimeSpace: return {s.k};
    case Phase::MaxSpace: return {max_of(s)};
    case Phase::AbsMaxSpace: return {absmax_of(s)};
    case Phase::LocalTimeSpace: return {visits_of(s)};
    case Phase::MaxMin: return {max_of(s), min_of(s)};
    case Phase::MinMaxSpace: return {min_of(s), max_of(s)};
  }
  return {};
}

bool sg_pair(const CostFunctional& cost, const AugmentedState& going,
             const AugmentedState& stopped) {
  return going.x == stopped.x && cost.dominates(going, stopped);
}

CostFunctional root_cost(const LatticeSpec& spec, ScalarFunction h) {
  if (!convex_on(grid_values(h, 0, spec.steps, spec.time_step), false)) {
    throw InvalidArgument("root cost needs a convex h on the time grid");
  }
  CostFunctional c;
  c.name = "root";
  c.phase = Phase::TimeSpace;
  c.kind = BarrierKind::Barrier;
  c.primary = [h](const AugmentedState& s, const LatticeSpec& sp) {
    return h(s.k * sp.time_step);
  };
  c.dominates = [](const AugmentedState& a, const AugmentedState& b) {
    return a.k > b.k;
  };
  c.params = {{"name", "root"}, {"h", h.to_json()}};
  return c;
}

CostFunctional rost_cost(const LatticeSpec& spec, ScalarFunction h) {
  if (!convex_on(negated(grid_values(h, 0, spec.steps, spec.time_step)), false)) {
    throw InvalidArgument("rost cost needs a concave h on the time grid");
  }
  CostFunctional c;
  c.name = "rost";
  c.phase = Phase::TimeSpace;
  c.kind = BarrierKind::Inverse;
  c.primary = [h](const AugmentedState& s, const LatticeSpec& sp) {
    return h(s.k * sp.time_step);
  };
  c.dominates = [](const AugmentedState& a, const AugmentedState& b) {
    return a.k < b.k;
  };
  c.params = {{"name", "rost"}, {"h", h.to_json()}};
  return c;
}

CostFunctional cave_cost(const LatticeSpec& spec, int pivot_index,
                         std::optional<ScalarFunction> phi) {
  if (pivot_index <= 0 || pivot_index > spec.steps) {
    throw InvalidArgument("cave pivot must lie in (0, N]");
  }
  const double t0 = pivot_index * spec.time_step;
  const ScalarFunction f = phi ? *phi : ScalarFunction::piecewise_cave(t0);
  const auto values = grid_values(f, 0, spec.steps, spec.time_step);
  const std::vector<double> before(values.begin(), values.begin() + pivot_index + 1);
  const std::vector<double> after(values.begin() + pivot_index, values.end());
  if (std::abs(values.front()) > kShapeTolerance ||
      std::abs(values[pivot_index] - 1.0) > kShapeTolerance) {
    throw InvalidArgument("cave phi must satisfy phi(0) = 0 and phi(t0) = 1");
  }
  if (!convex_on(negated(before), true) || !convex_on(after, true)) {
    throw InvalidArgument(
        "cave phi must be strictly concave before t0 and strictly convex after");
  }
  if (after.size() > 1 && !(after.back() < after.front())) {
    throw InvalidArgument("cave phi must decay after t0");
  }
  CostFunctional c;
  c.name = "cave";
  c.phase = Phase::TimeSpace;
  c.kind = BarrierKind::Cave;
  c.pivot = pivot_index;
  c.primary = [f](const AugmentedState& s, const LatticeSpec& sp) {
    return f(s.k * sp.time_step);
  };
  c.dominates = [pivot_index](const AugmentedState& a, const AugmentedState& b) {
    return (a.k < b.k && b.k <= pivot_index) || (pivot_index <= b.k && b.k < a.k);
  };
  c.params = {{"name", "cave"}, {"t0", t0}, {"phi", f.to_json()}};
  return c;
}

CostFunctional azema_yor_cost(const LatticeSpec& spec) {
  CostFunctional c;
  c.name = "azema-yor";
  c.required = needs(true, false, false);
  c.check_features(spec);
  c.phase = Phase::MaxSpace;
  c.kind = BarrierKind::ThresholdIncreasing;
  c.primary = [](const AugmentedState& s, const LatticeSpec& sp) {
    return -max_of(s) * sp.step_size;
  };
  c.secondary = [](const AugmentedState& s, const LatticeSpec& sp) {
    const double x = pos(s, sp);
    return (1.0 - std::exp2(-max_of(s) - 1.0)) * x * x;
  };
  c.dominates = [](const AugmentedState& a, const AugmentedState& b) {
    return max_of(a) > max_of(b);
  };
  c.params = {{"name", "azema-yor"}};
  return c;
}

CostFunctional jacka_cost(const LatticeSpec& spec, ScalarFunction phi) {
  CostFunctional c;
  c.name = "jacka";
  c.required = needs(true, true, false);
  c.check_features(spec);
  c.phase = Phase::AbsMaxSpace;
  c.kind = BarrierKind::TwoSided;
  c.primary = [phi](const AugmentedState& s, const LatticeSpec& sp) {
    return -phi(absmax_of(s) * sp.step_size);
  };
  c.secondary = [](const AugmentedState& s, const LatticeSpec& sp) {
    const double x = pos(s, sp);
    return (1.0 - std::exp2(-absmax_of(s) - 1.0)) * x * x;
  };
  c.dominates = [](const AugmentedState& a, const AugmentedState& b) {
    return absmax_of(a) > absmax_of(b);
  };
  c.params = {{"name", "jacka"}, {"phi", phi.to_json()}};
  return c;
}

namespace {

// (max, -min) of a strictly below (max, -min) of b in the product order.
bool range_below(const AugmentedState& a, const AugmentedState& b) {
  const int am = max_of(a), bm = max_of(b);
  const int an = -min_of(a), bn = -min_of(b);
  return am <= bm && an <= bn && (am != bm || an != bn);
}

}  // namespace

CostFunctional perkins_cost(const LatticeSpec& spec, ScalarFunction phi,
                            ScalarFunction weight) {
  CostFunctional c;
  c.name = "perkins";
  c.required = needs(true, true, false);
  c.check_features(spec);
  c.phase = Phase::MaxMin;
  c.kind = BarrierKind::ThresholdDecreasing;
  c.primary = [phi](const AugmentedState& s, const LatticeSpec& sp) {
    return phi(max_of(s) * sp.step_size) + phi(-min_of(s) * sp.step_size);
  };
  c.secondary = [weight](const AugmentedState& s, const LatticeSpec& sp) {
    const double x = pos(s, sp);
    return -x * x * (weight(max_of(s)) + weight(-min_of(s)));
  };
  c.dominates = [](const AugmentedState& a, const AugmentedState& b) {
    return range_below(a, b);
  };
  c.params = {{"name", "perkins"}, {"phi", phi.to_json()}, {"weight", weight.to_json()}};
  return c;
}

CostFunctional range_cost(const LatticeSpec& spec, ScalarFunction phi,
                          ScalarFunction weight) {
  CostFunctional c;
  c.name = "range";
  c.required = needs(true, true, false);
  c.check_features(spec);
  c.phase = Phase::MinMaxSpace;
  c.kind = BarrierKind::TwoSided;
  c.primary = [phi](const AugmentedState& s, const LatticeSpec& sp) {
    return -(phi(max_of(s) * sp.step_size) + phi(-min_of(s) * sp.step_size));
  };
  c.secondary = [weight](const AugmentedState& s, const LatticeSpec& sp) {
    const double x = pos(s, sp);
    return x * x * (weight(max_of(s)) + weight(-min_of(s)));
  };
  c.dominates = [](const AugmentedState& a, const AugmentedState& b) {
    return range_below(b, a);
  };
  c.params = {{"name", "range"}, {"phi", phi.to_json()}, {"weight", weight.to_json()}};
  return c;
}

CostFunctional vallois_cost(const LatticeSpec& spec, ScalarFunction h,
                            Direction direction) {
  const double sign = direction == Direction::Minimize ? 1.0 : -1.0;
  auto values = grid_values(h, 0, std::max(spec.steps, 2), spec.step_size);
  for (auto& v : values) v *= sign;
  const bool concave = convex_on(negated(values), true);
  const bool convex = convex_on(values, true);
  if (!concave && !convex) {
    throw InvalidArgument(
        "vallois cost needs h strictly convex or strictly concave on the grid");
  }
  CostFunctional c;
  c.name = "vallois";
  c.required = needs(false, false, true);
  c.check_features(spec);
  c.phase = Phase::LocalTimeSpace;
  c.primary = [h, sign](const AugmentedState& s, const LatticeSpec& sp) {
    return sign * h(visits_of(s) * sp.step_size);
  };
  if (concave) {
    // Minimizing a concave functional of L: going paths with less local time
    // than a stopped path at the same level are improvable.
    c.kind = BarrierKind::ThresholdIncreasing;
    c.secondary = [](const AugmentedState& s, const LatticeSpec& sp) {
      const double x = pos(s, sp);
      return std::exp(-visits_of(s) * sp.step_size) * x * x;
    };
    c.dominates = [](const AugmentedState& a, const AugmentedState& b) {
      return visits_of(a) < visits_of(b);
    };
  } else {
    c.kind = BarrierKind::ThresholdDecreasing;
    c.secondary = [](const AugmentedState& s, const LatticeSpec& sp) {
      const double x = pos(s, sp);
      return (1.0 - std::exp(-visits_of(s) * sp.step_size)) * x * x;
    };
    c.dominates = [](const AugmentedState& a, const AugmentedState& b) {
      return visits_of(a) > visits_of(b);
    };
  }
  c.params = {{"name", "vallois"},
              {"h", h.to_json()},
              {"direction", direction == Direction::Minimize ? "minimize" : "maximize"}};
  return c;
}

std::vector<std::string> catalog_names() {
  return {"root", "rost", "cave", "azema-yor", "jacka", "perkins", "range", "vallois"};
}

CostFunctional cost_from_json(const nlohmann::json& j, const LatticeSpec& spec) {
  if (!j.is_object() || !j.contains("name") || !j.at("name").is_string()) {
    throw InvalidArgument("cost must be an object with a string 'name'");
  }
  const auto name = j.at("name").get<std::string>();
  auto fn = [&](const char* key, const char* fallback) {
    return j.contains(key) ? ScalarFunction::from_json(j.at(key))
                           : ScalarFunction(fallback);
  };
  if (name == "root") return root_cost(spec, fn("h", "t^2"));
  if (name == "rost") return rost_cost(spec, fn("h", "sqrt"));
  if (name == "cave") {
    int pivot = -1;
    if (j.contains("t0_index")) {
      pivot = j.at("t0_index").get<int>();
    } else if (j.contains("t0")) {
      const double t0 = j.at("t0").get<double>();
      const double idx = t0 / spec.time_step;
      pivot = static_cast<int>(std::lround(idx));
      if (std::abs(idx - pivot) > 1e-9) {
        throw InvalidArgument("cave t0 must be a multiple of the time step");
      }
    } else {
      throw InvalidArgument("cave cost needs t0 or t0_index");
    }
    std::optional<ScalarFunction> phi;
    if (j.contains("phi")) phi = ScalarFunction::from_json(j.at("phi"));
    return cave_cost(spec, pivot, phi);
  }
  if (name == "azema-yor") return azema_yor_cost(spec);
  if (name == "jacka") return jacka_cost(spec, fn("phi", "t"));
  if (name == "perkins") return perkins_cost(spec, fn("phi", "t"), fn("weight", "saturating"));
  if (name == "range") return range_cost(spec, fn("phi", "t"), fn("weight", "saturating"));
  if (name == "vallois") {
    const auto dir = j.value("direction", std::string("minimize"));
    if (dir != "minimize" && dir != "maximize") {
      throw InvalidArgument("vallois direction must be minimize or maximize");
    }
    return vallois_cost(spec, fn("h", "sqrt"),
                        dir == "minimize" ? Direction::Minimize : Direction::Maximize);
  }
  throw InvalidArgument("unknown cost '" + name + "'");
}

}  // namespace skembed
