#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "kinlab/phase_space.hpp"

namespace kinlab::io {

using nlohmann::json;

/// Write `content` to `path` via a temporary file and rename.
void write_atomic(const std::filesystem::path& path, const std::string& content);

/// 17 significant digits, locale independent.
std::string format_double(double x);

/// Columns: cell, x, rho, u_1..u_d, T; header carries units.
std::string fields_to_csv(const MacroFields& fields, const SpatialGrid& sgrid);
/// Long format: cell, node, x, v_1..v_d, weight, f.
std::string dist_to_csv(const DistField& f);

json vec_to_json(const Vec& v);
Vec vec_from_json(const json& j);
/// Row-major flat array plus shape.
json mat_to_json(const Mat& m);
Mat mat_from_json(const json& j);

json fields_to_json(const MacroFields& fields, const SpatialGrid& sgrid);
MacroFields fields_from_json(const json& j);

json dist_to_json(const DistField& f);
DistField dist_from_json(const json& j);

}  // namespace kinlab::io
