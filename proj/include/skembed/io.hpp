#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "skembed/optsep.hpp"

namespace skembed {

/// {"lattice": {"steps", "step_size", "time_step"?, "kernel", "p_up"?, "tracked": [...]},
///  "start": measure, "target": measure, "cost": {"name", ...},
///  "mode": "exact" | {"soft": eps}, "secondary": bool}
/// Throws InvalidArgument (or FeatureError) on malformed input.
EmbeddingProblem problem_from_json(const nlohmann::json& j);
nlohmann::json problem_to_json(const EmbeddingProblem& problem);

/// {"levels", "psi", "phi": {state key: value}, "dual_objective", "tv_multiplier"?}
nlohmann::json certificate_to_json(const DualCertificate& cert, const StateGraph& graph);
DualCertificate certificate_from_json(const nlohmann::json& j, const StateGraph& graph);

/// Objective, gap, law, stop probabilities, certificate, coupling and the
/// stop-go report of an optimal solution.
nlohmann::json solution_to_json(const OptimalSolution& sol, const EmbeddingProblem& problem);

/// Sorted keys, two-space indentation, floats with 12 significant digits,
/// arrays of scalars on one line. Ends with a newline.
std::string canonical_dump(const nlohmann::json& j);

/// Reads and parses a JSON file; InvalidArgument if unreadable or malformed.
nlohmann::json read_json_file(const std::string& path);

}  // namespace skembed
