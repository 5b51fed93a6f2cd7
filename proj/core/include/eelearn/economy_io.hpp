#pragma once

#include <nlohmann/json.hpp>
#include <string>

#include "eelearn/economy.hpp"

namespace eelearn {

/// JSON schema for an economy definition file:
/// {
///   "n": 3, "m": 2, "sigma": 0.0,
///   "endowments": [[0.45, 0.05], [0.45, 0.05], [0.1, 0.9]],
///   "agents": [
///     {"family": "linear", "theta": [0.1, 1.0], "theta_min": 0.05, "theta_max": 1.2},
///     {"family": "ces", "rho": 0.5, "theta": [...], ...},
///     {"family": "amdahl", "f": 0.2, "theta": [...], ...}
///   ]
/// }
/// "f" may be a scalar (replicated across resources) or an m-vector.
/// Parsing rejects endowment columns that do not sum to 1.
Economy economy_from_json(const nlohmann::json& j);
nlohmann::json economy_to_json(const Economy& e);

Economy load_economy(const std::string& path);
void save_economy(const Economy& e, const std::string& path);

nlohmann::json vector_to_json(const Vector& v);
Vector vector_from_json(const nlohmann::json& j);
nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);

}  // namespace eelearn
