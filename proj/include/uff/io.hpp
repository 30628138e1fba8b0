#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "uff/types.hpp"

namespace uff {

/// Reads any of the supported cloud formats, chosen by content:
///  - binary: magic "UFFPTS01", u32 little-endian count, count xyz triples
///    of little-endian float32;
///  - OFF: vertex list only, faces ignored;
///  - otherwise ASCII, one "x y z" per line ('#' comments and blank lines
///    allowed).
/// Malformed input or non-finite coordinates raise a parse error naming the
/// offending byte offset (binary) or line (text).
PointCloud load_cloud(const std::filesystem::path& path);

/// The binary format above; load_cloud(save_cloud_binary(...)) is identity
/// and re-saving reproduces the bytes.
void save_cloud_binary(const std::filesystem::path& path, const PointCloud& cloud);

void save_cloud_ascii(const std::filesystem::path& path, const PointCloud& cloud);

/// Per-point integer labels, one per line. `expected` = -1 skips the length
/// check.
std::vector<int> load_labels(const std::filesystem::path& path, int expected = -1);
void save_labels(const std::filesystem::path& path, std::span<const int> labels);

/// ASCII PLY with per-vertex colors from a fixed palette indexed by part id,
/// for eyeballing segmentations in any mesh viewer.
void export_ply(const std::filesystem::path& path, const PointCloud& cloud,
                std::span<const int> parts);

/// Center on the centroid and scale the farthest point onto the unit sphere.
/// A degenerate (single-position) cloud is only centered.
PointCloud normalize_unit_sphere(const PointCloud& cloud);

}  // namespace uff
