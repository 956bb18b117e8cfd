#include "skembed/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "skembed/error.hpp"

namespace skembed {

using nlohmann::json;

namespace {

const json& require(const json& j, const char* key, const char* where) {
  if (!j.is_object() || !j.contains(key)) {
    throw InvalidArgument(std::string(where) + " is missing '" + key + "'");
  }
  return j.at(key);
}

TrackedFeatures tracked_from_json(const json& j) {
  TrackedFeatures t;
  if (!j.is_array()) throw InvalidArgument("lattice.tracked must be an array of names");
  for (const auto& e : j) {
    const auto name = e.get<std::string>();
    if (name == "max") {
      t.max = true;
    } else if (name == "min") {
      t.min = true;
    } else if (name == "zero_visits") {
      t.zero_visits = true;
    } else {
      throw InvalidArgument("unknown tracked feature '" + name + "'");
    }
  }
  return t;
}

json tracked_to_json(const TrackedFeatures& t) {
  json out = json::array();
  if (t.max) out.push_back("max");
  if (t.min) out.push_back("min");
  if (t.zero_visits) out.push_back("zero_visits");
  return out;
}

SolveMode mode_from_json(const json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "exact") return SolveMode::exact();
    throw InvalidArgument("mode must be \"exact\" or {\"soft\": epsilon}");
  }
  if (j.is_object() && j.contains("soft") && j.at("soft").is_number()) {
    return SolveMode::tv(j.at("soft").get<double>());
  }
  throw InvalidArgument("mode must be \"exact\" or {\"soft\": epsilon}");
}

std::string format_number(double v) {
  if (!std::isfinite(v)) return "null";
  if (v == 0.0) return "0";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

bool is_scalar(const json& j) { return !j.is_object() && !j.is_array(); }

void write(const json& j, std::string& out, int indent) {
  const std::string pad(static_cast<std::size_t>(indent + 2), ' ');
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (const auto& [k, v] : j.items()) {  // std::map keeps keys sorted
        if (!first) out += ",\n";
        first = false;
        out += pad + json(k).dump() + ": ";
        write(v, out, indent + 2);
      }
      out += "\n" + std::string(static_cast<std::size_t>(indent), ' ') + "}";
      return;
    }
    case json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      bool flat = true;
      for (const auto& e : j) flat = flat && (is_scalar(e) ||
                                              (e.is_array() && std::all_of(e.begin(), e.end(),
                                                                           is_scalar)));
      if (flat) {
        out += "[";
        bool first = true;
        for (const auto& e : j) {
          if (!first) out += ", ";
          first = false;
          write(e, out, indent);
        }
        out += "]";
        return;
      }
      out += "[\n";
      bool first = true;
      for (const auto& e : j) {
        if (!first) out += ",\n";
        first = false;
        out += pad;
        write(e, out, indent + 2);
      }
      out += "\n" + std::string(static_cast<std::size_t>(indent), ' ') + "]";
      return;
    }
    case json::value_t::number_float:
      out += format_number(j.get<double>());
      return;
    default:
      out += j.dump();
  }
}

}  // namespace

EmbeddingProblem problem_from_json(const json& j) {
  if (!j.is_object()) throw InvalidArgument("problem must be a JSON object");
  try {
    const auto& lat = require(j, "lattice", "problem");
    LatticeSpec spec;
    spec.steps = require(lat, "steps", "lattice").get<int>();
    spec.step_size = lat.value("step_size", 1.0);
    spec.kernel = kernel_from_string(lat.value("kernel", std::string("symmetric")));
    spec.p_up = spec.kernel == Kernel::Custom ? require(lat, "p_up", "lattice").get<double>()
                                              : 0.5;
    if (lat.contains("time_step")) {
      spec.time_step = lat.at("time_step").get<double>();
    } else {
      spec.time_step = spec.kernel == Kernel::Symmetric ? spec.step_size * spec.step_size : 1.0;
    }
    if (lat.contains("tracked")) spec.tracked = tracked_from_json(lat.at("tracked"));

    DiscreteMeasure start = require(j, "start", "problem").get<DiscreteMeasure>();
    DiscreteMeasure target = require(j, "target", "problem").get<DiscreteMeasure>();
    if (lat.contains("start_support")) {
      spec.start_support = lat.at("start_support").get<std::vector<int>>();
    } else {
      for (const auto& a : start.atoms()) spec.start_support.push_back(a.index);
    }
    spec.validate();

    EmbeddingProblem p{spec, std::move(start), std::move(target),
                       cost_from_json(require(j, "cost", "problem"), spec),
                       j.contains("mode") ? mode_from_json(j.at("mode")) : SolveMode::exact(),
                       j.value("secondary", false)};
    return p;
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("malformed problem: ") + e.what());
  }
}

json problem_to_json(const EmbeddingProblem& p) {
  json lat = {{"steps", p.spec.steps},
              {"step_size", p.spec.step_size},
              {"time_step", p.spec.time_step},
              {"kernel", std::string(to_string(p.spec.kernel))},
              {"tracked", tracked_to_json(p.spec.tracked)},
              {"start_support", p.spec.start_support}};
  if (p.spec.kernel == Kernel::Custom) lat["p_up"] = p.spec.p_up;
  json out = {{"lattice", lat},
              {"start", p.start},
              {"target", p.target},
              {"cost", p.cost.params},
              {"secondary", p.secondary}};
  out["mode"] = p.mode.soft ? json{{"soft", p.mode.epsilon}} : json("exact");
  return out;
}

json certificate_to_json(const DualCertificate& cert, const StateGraph& graph) {
  json phi = json::object();
  for (std::size_t s = 0; s < graph.size(); ++s) phi[state_key(graph.state(s))] = cert.phi[s];
  json out = {{"levels", cert.levels},
              {"psi", cert.psi},
              {"phi", phi},
              {"dual_objective", cert.dual_objective}};
  if (cert.tv_multiplier) out["tv_multiplier"] = *cert.tv_multiplier;
  return out;
}

DualCertificate certificate_from_json(const json& j, const StateGraph& graph) {
  try {
    DualCertificate c;
    c.levels = require(j, "levels", "certificate").get<std::vector<int>>();
    c.psi = require(j, "psi", "certificate").get<std::vector<double>>();
    if (c.levels.size() != c.psi.size()) {
      throw InvalidArgument("certificate levels and psi differ in length");
    }
    const auto& phi = require(j, "phi", "certificate");
    if (!phi.is_object()) throw InvalidArgument("certificate phi must be an object");
    c.phi.assign(graph.size(), 0.0);
    std::vector<bool> seen(graph.size(), false);
    for (const auto& [key, v] : phi.items()) {
      const auto s = graph.index_of(parse_state_key(graph.spec(), key));
      c.phi[s] = v.get<double>();
      seen[s] = true;
    }
    for (std::size_t s = 0; s < graph.size(); ++s) {
      if (!seen[s]) {
        throw InvalidArgument("certificate phi misses state " + state_key(graph.state(s)));
      }
    }
    if (j.contains("tv_multiplier")) c.tv_multiplier = j.at("tv_multiplier").get<double>();
    c.dual_objective = j.value("dual_objective", 0.0);
    return c;
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("malformed certificate: ") + e.what());
  }
}

json solution_to_json(const OptimalSolution& sol, const EmbeddingProblem& problem) {
  const auto& g = sol.xi.graph();
  json out = json(sol.xi);  // stop_prob
  out["status"] = "optimal";
  out["objective"] = sol.objective;
  if (sol.secondary_objective) out["secondary_objective"] = *sol.secondary_objective;
  out["gap"] = sol.gap;
  out["iterations"] = sol.iterations;
  out["tv_deviation"] = sol.tv_deviation;
  out["law"] = pushforward_law(sol.xi);
  out["expected_time"] = expected_time(sol.xi);
  out["cost"] = problem.cost.params;
  out["mode"] = problem.mode.soft ? json{{"soft", problem.mode.epsilon}} : json("exact");
  if (sol.certificate) {
    out["certificate"] = certificate_to_json(*sol.certificate, g);
    out["dual_objective"] = sol.certificate->dual_objective;
  }

  const auto coupling = induced_coupling(sol.xi);
  out["coupling"] = {{"start_levels", coupling.start_levels},
                     {"end_levels", coupling.end_levels},
                     {"mass", coupling.mass}};

  const auto violations = verify_monotonicity(sol.xi, problem.cost);
  json pairs = json::array();
  for (const auto& v : violations) {
    pairs.push_back({state_key(g.state(v.going)), state_key(g.state(v.stopped))});
  }
  out["monotonicity"] = {{"violations", violations.size()}, {"pairs", pairs}};
  return out;
}

std::string canonical_dump(const json& j) {
  std::string out;
  write(j, out, 0);
  out += "\n";
  return out;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InvalidArgument(path + ": " + e.what());
  }
}

}  // namespace skembed
