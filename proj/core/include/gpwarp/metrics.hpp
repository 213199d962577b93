#pragma once

#include "gpwarp/geometry.hpp"

#include <span>

namespace gpwarp {

double rmse(const Volume& a, const Volume& b);

// Fraction of voxels where |a_i - b_i| > tol. The 0.5 default suits
// binarized 0/255 volumes.
double mismatch_fraction(const Volume& a, const Volume& b, double tol = 0.5);

double mean_abs_diff(const Volume& a, const Volume& b);

// Modified Hausdorff distance (Dubuisson-Jain): the larger of the two
// directed mean nearest-neighbor distances. Brute force O(n*m).
double mhd(std::span<const Vec3> a, std::span<const Vec3> b);

}  // namespace gpwarp
