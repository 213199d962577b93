#pragma once

#include "gpwarp/geometry.hpp"

#include <cstdint>
#include <functional>

namespace gpwarp {

enum class PhantomKind { BinaryBlob, GradientRamp };

// BinaryBlob: union of 3 seeded random ellipsoids, 255 inside / 0 outside.
// GradientRamp: x + 2y + 3z in world mm, exact under linear resampling.
Volume make_phantom(const Grid& grid, PhantomKind kind, std::uint64_t seed);

// Smooth analytic displacement v(x) = amplitude * exp(-|x-c|^2 / (2 r^2)).
struct BumpField {
  Vec3 center = Vec3::Zero();
  Vec3 amplitude = Vec3::Zero();
  double radius = 1.0;

  Vec3 operator()(const Vec3& x) const;
};

BumpField make_bump_deformation(const Vec3& center, const Vec3& amplitude,
                                double radius);

using AnalyticField = std::function<Vec3(const Vec3&)>;

// Analytic field evaluated at every voxel center (the exact dense reference
// for end-to-end tests). No uncertainty channel.
DenseFieldResult evaluate_field_on_grid(const AnalyticField& field, const Grid& grid);

// n distinct voxel centers drawn uniformly (seeded, ascending voxel order),
// with x_i the center, d_i = v(x_i) and matched point x_i + d_i.
SparseCorrespondence sample_landmarks(const AnalyticField& field, const Grid& grid,
                                      std::size_t n, std::uint64_t seed);

// Uniform subset without replacement of size round(fraction * n), at least 1,
// rounding half to even. Keeps pairings and relative order.
SparseCorrespondence subsample(const SparseCorrespondence& corr, double fraction,
                               std::uint64_t seed);

// One seeded synthetic registration case: a blob phantom deformed by a
// seeded bump, the exact dense field and warped target, and the sampled
// feature set with its retained subset.
struct SyntheticCaseParams {
  std::size_t feature_count = 1000;
  double used_fraction = 0.2;
  double oob_value = 0.0;
};

struct SyntheticCase {
  Volume phantom;
  BumpField bump;
  DenseFieldResult true_field;
  Volume target;
  SparseCorrespondence features;   // all sampled correspondences
  SparseCorrespondence landmarks;  // the retained subset
};

SyntheticCase make_synthetic_case(const Grid& grid, std::uint64_t seed,
                                  const SyntheticCaseParams& params = {});

}  // namespace gpwarp
