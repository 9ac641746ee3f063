#pragma once

#include "phaseopt/grid.hpp"

#include <filesystem>
#include <string>

namespace phaseopt {

/// CSV with header `x[,y],value`, one row per cell in storage order.
/// Values use shortest round-trip decimal form, so write/read is bit-exact.
std::string format_field_csv(const Grid& grid, const Field& v);
Field parse_field_csv(const Grid& grid, const std::string& text, const std::string& origin = "<string>");

/// All levels in one table with header `t,x[,y],value`, level-major.
std::string format_trajectory_csv(const Grid& grid, const TimeGrid& tgrid, const Trajectory& v);

void write_field_csv(const std::filesystem::path& path, const Grid& grid, const Field& v);
Field read_field_csv(const std::filesystem::path& path, const Grid& grid);

/// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace phaseopt
