#pragma once

#include <filesystem>

#include "dvd/pointcloud.hpp"

namespace dvd::cloud {

/// ASCII OFF: "OFF" header, counts line, vertex lines, triangle face lines.
/// Throws ParseError (with line number) or IoError.
TriangleMesh load_off(const std::filesystem::path& path);

/// ASCII PLY with a vertex element carrying x y z and optionally nx ny nz.
PointCloud load_ply(const std::filesystem::path& path);

/// Writes ASCII PLY, one "x y z [nx ny nz]" line per vertex with
/// 9-significant-digit decimals.
void save_ply(const PointCloud& cloud, const std::filesystem::path& path);

}  // namespace dvd::cloud
