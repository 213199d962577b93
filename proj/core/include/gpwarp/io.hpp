#pragma once

#include "gpwarp/geometry.hpp"

#include <filesystem>

namespace gpwarp {

// File formats (see docs/FORMATS.md): a UTF-8 JSON header `<name>.vjson`
// plus a little-endian raw file of 32-bit floats in x-fastest order.
// Landmarks are CSV with header `x,y,z,xt,yt,zt` at 17 significant digits.
// All writers are byte-deterministic for identical inputs.

void write_volume(const Volume& vol, const std::filesystem::path& header_path);
Volume read_volume(const std::filesystem::path& header_path);

// Grid geometry from a volume or field header, without touching the raw data.
Grid read_grid(const std::filesystem::path& header_path);

void write_landmarks(const SparseCorrespondence& corr,
                     const std::filesystem::path& path);
SparseCorrespondence read_landmarks(const std::filesystem::path& path);

// Plain point sets: CSV with header `x,y,z`.
void write_points(std::span<const Vec3> points, const std::filesystem::path& path);
std::vector<Vec3> read_points(const std::filesystem::path& path);

// Field headers carry "components": 3, or 4 when the uncertainty channel is
// present; the raw file interleaves [vx, vy, vz, (var)] per voxel.
void write_field(const DenseFieldResult& field,
                 const std::filesystem::path& header_path);
DenseFieldResult read_field(const std::filesystem::path& header_path);

// 8-bit binary PGM of one slice, linearly windowed to [lo, hi] and rounded
// half-up to 0..255.
void write_slice_pgm(const Volume& vol, int axis, std::int64_t index,
                     const std::filesystem::path& path, double window_lo,
                     double window_hi);

}  // namespace gpwarp
