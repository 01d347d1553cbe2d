#pragma once

// JSON conversions shared by the pool format and the experiment outputs.

#include "hcr/reservoir.hpp"

#include <json.hpp>

#include <filesystem>

namespace hcr {

using Json = nlohmann::ordered_json;

Json to_json(const ReservoirConfig& cfg);
ReservoirConfig reservoir_config_from_json(const Json& j);

Json to_json(const GridAxes& axes);
GridAxes grid_axes_from_json(const Json& j);

Json matrix_to_json(const Matrix& m);
Json vector_to_json(const Vector& v);

/// Writes pretty JSON, creating parent directories. Throws Filesystem on failure.
void write_json(const std::filesystem::path& path, const Json& j);
Json read_json(const std::filesystem::path& path);

/// Number formatting used by every CSV writer (17 significant digits, "inf" for +inf).
std::string format_number(double x);

}  // namespace hcr
