#pragma once

#include "gpwarp/geometry.hpp"

namespace gpwarp {

// How a dense displacement field is applied, and which end of the
// correspondences an interpolated field should be anchored at for that use:
//   PullbackTargetAnchored:    out(y) = source(y - v(y)); train on (matched, d)
//                              so that y - v(y) recovers the source location.
//   PushforwardSourceAnchored: out(y) = source(y + v(y)); train on (source, d).
enum class WarpConvention { PullbackTargetAnchored, PushforwardSourceAnchored };

FieldAnchor anchor_for(WarpConvention convention);

// Tensor-product linear interpolation of the 2^dim surrounding voxel values.
// Points outside the voxel-center hull return oob_value.
double trilinear_sample(const Volume& vol, const Vec3& p, double oob_value = 0.0);

struct WarpOptions {
  WarpConvention convention = WarpConvention::PullbackTargetAnchored;
  double oob_value = 0.0;
  int threads = 0;
};

// Backward-mapping resample of `source` through `field`. The output grid is
// the field grid, which must equal the source grid.
Volume warp_image(const Volume& source, const DenseFieldResult& field,
                  const WarpOptions& options = {});

}  // namespace gpwarp
