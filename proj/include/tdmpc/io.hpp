#pragma once

#include <filesystem>
#include <string>

#include <Eigen/Dense>
#include <json.hpp>

#include "tdmpc/model.hpp"

namespace tdmpc {

using json = nlohmann::json;

/// Matrices are row-major nested arrays; an n x 1 matrix may also be a flat array.
Eigen::MatrixXd matrix_from_json(const json& j, const std::string& what);
Eigen::VectorXd vector_from_json(const json& j, const std::string& what);
json to_json(const Eigen::MatrixXd& M);
json to_json(const Eigen::VectorXd& v);

/// Scenario document schema: see scenarios/README.md.
Scenario scenario_from_json(const json& doc);
Scenario load_scenario(const std::filesystem::path& path);
json scenario_to_json(const Scenario& s);

/// 64-bit FNV-1a of the canonical dump, as 16 hex digits.
std::string content_hash(const json& doc);

}  // namespace tdmpc
