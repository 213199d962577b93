#include "gpwarp/geometry.hpp"

#include "gpwarp/errors.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <utility>

namespace gpwarp {

bool all_finite(const Vec3& v) {
  return std::isfinite(v[0]) && std::isfinite(v[1]) && std::isfinite(v[2]);
}

void Grid::validate() const {
  if (dim != 2 && dim != 3) throw InvalidInput("grid dim must be 2 or 3");
  if (dim == 2 && dims[2] != 1) throw InvalidInput("2-d grid requires dims[2] == 1");
  std::size_t count = 1;
  for (int k = 0; k < 3; ++k) {
    if (dims[k] < 1) throw InvalidInput("grid dims must be >= 1");
    if (!(spacing[k] > 0.0) || !std::isfinite(spacing[k]))
      throw InvalidInput("grid spacing must be positive and finite");
    const auto d = static_cast<std::size_t>(dims[k]);
    if (count > std::numeric_limits<std::size_t>::max() / d)
      throw InvalidInput("grid voxel count overflows addressable size");
    count *= d;
  }
  if (!all_finite(origin)) throw InvalidInput("grid origin must be finite");
}

std::size_t Grid::voxel_count() const {
  return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) *
         static_cast<std::size_t>(dims[2]);
}

std::size_t Grid::linear_index(const Index3& index) const {
  return static_cast<std::size_t>(index[0]) +
         static_cast<std::size_t>(dims[0]) *
             (static_cast<std::size_t>(index[1]) +
              static_cast<std::size_t>(dims[1]) * static_cast<std::size_t>(index[2]));
}

Vec3 Grid::world_extent() const {
  return Vec3(static_cast<double>(dims[0] - 1) * spacing[0],
              static_cast<double>(dims[1] - 1) * spacing[1],
              static_cast<double>(dims[2] - 1) * spacing[2]);
}

bool operator==(const Grid& a, const Grid& b) {
  return a.dims == b.dims && a.spacing == b.spacing && a.origin == b.origin &&
         a.dim == b.dim;
}

Vec3 voxel_to_world(const Grid& grid, const Index3& index) {
  for (int k = 0; k < 3; ++k) {
    if (index[k] < 0 || index[k] >= grid.dims[k])
      throw InvalidInput("index out of grid");
  }
  return grid.origin + Vec3(static_cast<double>(index[0]) * grid.spacing[0],
                            static_cast<double>(index[1]) * grid.spacing[1],
                            static_cast<double>(index[2]) * grid.spacing[2]);
}

Vec3 voxel_center(const Grid& grid, std::size_t linear) {
  const auto nx = static_cast<std::size_t>(grid.dims[0]);
  const auto ny = static_cast<std::size_t>(grid.dims[1]);
  const std::size_t i = linear % nx;
  const std::size_t j = (linear / nx) % ny;
  const std::size_t k = linear / (nx * ny);
  return grid.origin + Vec3(static_cast<double>(i) * grid.spacing[0],
                            static_cast<double>(j) * grid.spacing[1],
                            static_cast<double>(k) * grid.spacing[2]);
}

Index3 nearest_voxel(const Grid& grid, const Vec3& p) {
  Index3 out{};
  for (int k = 0; k < 3; ++k) {
    const double u = (p[k] - grid.origin[k]) / grid.spacing[k];
    auto i = static_cast<std::int64_t>(std::llround(u));
    if (i < 0) i = 0;
    if (i > grid.dims[k] - 1) i = grid.dims[k] - 1;
    out[k] = i;
  }
  return out;
}

std::vector<Vec3> iterate_grid_points(const Grid& grid) {
  grid.validate();
  std::vector<Vec3> points;
  points.reserve(grid.voxel_count());
  for (std::int64_t k = 0; k < grid.dims[2]; ++k)
    for (std::int64_t j = 0; j < grid.dims[1]; ++j)
      for (std::int64_t i = 0; i < grid.dims[0]; ++i)
        points.push_back(grid.origin +
                         Vec3(static_cast<double>(i) * grid.spacing[0],
                              static_cast<double>(j) * grid.spacing[1],
                              static_cast<double>(k) * grid.spacing[2]));
  return points;
}

void Volume::validate() const {
  grid.validate();
  if (samples.size() != grid.voxel_count())
    throw InvalidInput("volume sample count does not match grid");
  for (double s : samples)
    if (!std::isfinite(s)) throw InvalidInput("volume samples must be finite");
}

double Volume::at(const Index3& index) const {
  for (int k = 0; k < 3; ++k)
    if (index[k] < 0 || index[k] >= grid.dims[k])
      throw InvalidInput("index out of grid");
  return samples[grid.linear_index(index)];
}

double& Volume::at(const Index3& index) {
  for (int k = 0; k < 3; ++k)
    if (index[k] < 0 || index[k] >= grid.dims[k])
      throw InvalidInput("index out of grid");
  return samples[grid.linear_index(index)];
}

namespace {
constexpr double kPairTolerance = 1e-9;  // mm, per component
}

void SparseCorrespondence::validate() const {
  if (dim != 2 && dim != 3) throw InvalidInput("correspondence dim must be 2 or 3");
  const std::size_t n = source_points.size();
  if (n < 1) throw InvalidInput("correspondence needs at least one landmark");
  if (matched_points.size() != n || displacements.size() != n)
    throw InvalidInput("correspondence arrays must have equal length");
  for (std::size_t i = 0; i < n; ++i) {
    if (!all_finite(source_points[i]) || !all_finite(matched_points[i]) ||
        !all_finite(displacements[i]))
      throw InvalidInput("correspondence coordinates must be finite");
    const Vec3 expected = matched_points[i] - source_points[i];
    for (int k = 0; k < 3; ++k) {
      if (std::abs(displacements[i][k] - expected[k]) > kPairTolerance)
        throw InvalidInput("displacement " + std::to_string(i) +
                           " does not match its point pair");
    }
  }
  if (target_points) {
    for (const Vec3& p : *target_points)
      if (!all_finite(p)) throw InvalidInput("target points must be finite");
  }
}

SparseCorrespondence SparseCorrespondence::from_pairs(std::vector<Vec3> source,
                                                      std::vector<Vec3> matched,
                                                      int dim) {
  SparseCorrespondence corr;
  corr.dim = dim;
  corr.source_points = std::move(source);
  corr.matched_points = std::move(matched);
  corr.displacements.reserve(corr.source_points.size());
  if (corr.source_points.size() != corr.matched_points.size())
    throw InvalidInput("correspondence arrays must have equal length");
  for (std::size_t i = 0; i < corr.source_points.size(); ++i)
    corr.displacements.push_back(corr.matched_points[i] - corr.source_points[i]);
  corr.validate();
  return corr;
}

void DenseFieldResult::validate() const {
  grid.validate();
  if (field.size() != grid.voxel_count())
    throw InvalidInput("field length does not match grid");
  if (!uncertainty.empty()) {
    if (uncertainty.size() != field.size())
      throw InvalidInput("uncertainty length does not match field");
    for (double u : uncertainty)
      if (!(u >= -1e-9) || !std::isfinite(u))
        throw InvalidInput("uncertainty must be finite and non-negative");
  }
  for (const Vec3& v : field)
    if (!all_finite(v)) throw InvalidInput("field vectors must be finite");
}

std::span<const Vec3> anchor_points(const SparseCorrespondence& corr,
                                    FieldAnchor anchor) {
  return anchor == FieldAnchor::SourcePoints ? std::span<const Vec3>(corr.source_points)
                                             : std::span<const Vec3>(corr.matched_points);
}

}  // namespace gpwarp
