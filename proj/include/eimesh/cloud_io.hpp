#pragma once

// Point cloud files.
//
// PLY (ascii / binary_little_endian): the `vertex` element must carry x y z;
// nx ny nz are read when all three are present; per-point scanner origins are
// read from ox oy oz. Any other property or element is skipped. Header
// comments recognised: `comment dim 2` (planar cloud stored with z = 0) and
// `comment scan_origin X Y Z` (one origin for the whole cloud).
//
// XYZ: one point per line, `x y z` or `x y z nx ny nz`; `#` starts a comment
// line, and `# dim 2` flags a planar cloud.

#include "eimesh/pointcloud.hpp"

#include <filesystem>

namespace eimesh {

enum class CloudFormat { ply_ascii, ply_binary_le, xyz };

// Format from the extension (.xyz/.txt -> xyz) or, for .ply, the header.
CloudFormat detect_cloud_format(const std::filesystem::path& path);

OrientedPointCloud load_cloud(const std::filesystem::path& path, CloudFormat format);
OrientedPointCloud load_cloud(const std::filesystem::path& path);

void save_cloud(const OrientedPointCloud& cloud, const std::filesystem::path& path,
                CloudFormat format);

}  // namespace eimesh
