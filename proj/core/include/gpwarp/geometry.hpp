#pragma once

#include <Eigen/Core>

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace gpwarp {

// World coordinates are millimeters throughout. Grids are axis-aligned;
// voxel index (0,0,0) sits at the grid origin and samples are linearized
// x-fastest: linear = i + dims[0] * (j + dims[1] * k).
using Vec3 = Eigen::Vector3d;
using Index3 = std::array<std::int64_t, 3>;

bool all_finite(const Vec3& v);

struct Grid {
  Index3 dims{1, 1, 1};
  Vec3 spacing{1.0, 1.0, 1.0};
  Vec3 origin{0.0, 0.0, 0.0};
  // Working dimensionality. 3 is the primary path; 2 exists for cheap planar
  // tests and requires dims[2] == 1 with all z coordinates at origin[2].
  int dim = 3;

  void validate() const;
  std::size_t voxel_count() const;
  std::size_t linear_index(const Index3& index) const;
  Vec3 world_extent() const;  // (dims[k]-1) * spacing[k] per axis
};

bool operator==(const Grid& a, const Grid& b);

// World position of a voxel index; throws InvalidInput("index out of grid").
Vec3 voxel_to_world(const Grid& grid, const Index3& index);

// Unchecked world position of a linearized voxel index.
Vec3 voxel_center(const Grid& grid, std::size_t linear);

// Index of the voxel whose center is nearest to p, clamped to the grid.
Index3 nearest_voxel(const Grid& grid, const Vec3& p);

// All voxel centers in x-fastest order.
std::vector<Vec3> iterate_grid_points(const Grid& grid);

struct Volume {
  Grid grid;
  std::vector<double> samples;

  void validate() const;
  double at(const Index3& index) const;
  double& at(const Index3& index);
};

// Matched landmark pairs and their displacement vectors. `displacements[i]`
// must equal matched_points[i] - source_points[i] to 1e-9 mm per component.
struct SparseCorrespondence {
  std::vector<Vec3> source_points;
  std::vector<Vec3> matched_points;
  std::vector<Vec3> displacements;
  // Raw target feature set, carried for provenance only.
  std::optional<std::vector<Vec3>> target_points;
  int dim = 3;

  std::size_t size() const { return source_points.size(); }
  void validate() const;

  static SparseCorrespondence from_pairs(std::vector<Vec3> source,
                                         std::vector<Vec3> matched,
                                         int dim = 3);
};

struct DenseFieldResult {
  Grid grid;
  std::vector<Vec3> field;
  std::vector<double> uncertainty;  // empty when the interpolator has none

  bool has_uncertainty() const { return !uncertainty.empty(); }
  void validate() const;
};

// Which end of each correspondence anchors an interpolated field.
enum class FieldAnchor { SourcePoints, MatchedPoints };

std::span<const Vec3> anchor_points(const SparseCorrespondence& corr,
                                    FieldAnchor anchor);

}  // namespace gpwarp
