#pragma once

#include "gpwarp/geometry.hpp"

#include <array>

namespace gpwarp {

// Cubic free-form deformation on a uniform control lattice that covers the
// image grid with a 3-control-point margin on every side.
struct BsplineField {
  Grid control_grid;               // lattice dims/spacing/origin
  std::vector<Vec3> coefficients;  // one d-vector per control point, x-fastest
  double lambda = 0.0;

  std::size_t size() const { return coefficients.size(); }
};

// Uniform cubic B-spline basis values for fractional coordinate t in [0, 1].
std::array<double, 4> cubic_bspline_weights(double t);

Vec3 default_control_spacing(const Grid& image_grid);  // extent / 8 per axis

// Least-squares fit of the control coefficients to the landmark
// displacements, ridge-regularized by lambda, solved per axis via the
// normal equations. The anchor selects which end of each correspondence
// the field is attached to (see WarpConvention).
BsplineField fit_bspline(const SparseCorrespondence& corr, const Grid& image_grid,
                         const Vec3& control_spacing, double lambda = 1e-6,
                         FieldAnchor anchor = FieldAnchor::SourcePoints);
BsplineField fit_bspline(const SparseCorrespondence& corr, const Grid& image_grid,
                         double control_spacing, double lambda = 1e-6,
                         FieldAnchor anchor = FieldAnchor::SourcePoints);

// Field value at a point inside the lattice's full-support region.
Vec3 eval_bspline_at(const BsplineField& field, const Vec3& p);

// Field at every voxel center of `grid`; no uncertainty channel.
DenseFieldResult eval_bspline(const BsplineField& field, const Grid& grid);

}  // namespace gpwarp
