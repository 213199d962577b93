#include "gpwarp/warp.hpp"

#include "gpwarp/errors.hpp"
#include "parallel_for.hpp"

#include <cmath>

namespace gpwarp {

FieldAnchor anchor_for(WarpConvention convention) {
  return convention == WarpConvention::PullbackTargetAnchored
             ? FieldAnchor::MatchedPoints
             : FieldAnchor::SourcePoints;
}

namespace {

// Tensor-product linear interpolation at a continuous voxel index.
double sample_at_index(const Volume& vol, const double u[3], double oob_value) {
  const Grid& g = vol.grid;
  std::int64_t base[3];
  double frac[3];
  for (int a = 0; a < 3; ++a) {
    if (a >= g.dim) {
      base[a] = 0;
      frac[a] = 0.0;
      continue;
    }
    const double last = static_cast<double>(g.dims[a] - 1);
    if (!(u[a] >= 0.0) || u[a] > last) return oob_value;
    auto i0 = static_cast<std::int64_t>(std::floor(u[a]));
    if (i0 > g.dims[a] - 2) i0 = g.dims[a] >= 2 ? g.dims[a] - 2 : 0;
    base[a] = i0;
    frac[a] = u[a] - static_cast<double>(i0);
  }

  // Accumulate only non-zero corner weights; the first term assigns instead
  // of adding, so sampling exactly at a voxel center returns 1.0 * value.
  double acc = 0.0;
  bool first = true;
  for (int c = 0; c < 8; ++c) {
    double w = 1.0;
    Index3 idx{};
    for (int a = 0; a < 3; ++a) {
      const int bit = (c >> a) & 1;
      w *= bit ? frac[a] : 1.0 - frac[a];
      idx[a] = base[a] + bit;
    }
    if (w == 0.0) continue;
    const double term = w * vol.samples[g.linear_index(idx)];
    acc = first ? term : acc + term;
    first = false;
  }
  return first ? 0.0 : acc;
}

}  // namespace

double trilinear_sample(const Volume& vol, const Vec3& p, double oob_value) {
  const Grid& g = vol.grid;
  double u[3] = {0.0, 0.0, 0.0};
  for (int a = 0; a < g.dim; ++a) u[a] = (p[a] - g.origin[a]) / g.spacing[a];
  return sample_at_index(vol, u, oob_value);
}

Volume warp_image(const Volume& source, const DenseFieldResult& field,
                  const WarpOptions& options) {
  source.validate();
  if (!(source.grid == field.grid)) throw InvalidInput("grid mismatch");
  if (field.field.size() != field.grid.voxel_count())
    throw InvalidInput("field length does not match grid");

  const double sign =
      options.convention == WarpConvention::PullbackTargetAnchored ? -1.0 : 1.0;

  Volume out;
  out.grid = field.grid;
  const Grid& g = out.grid;
  const std::size_t n = g.voxel_count();
  out.samples.resize(n);
  const auto nx = static_cast<std::size_t>(g.dims[0]);
  const auto ny = static_cast<std::size_t>(g.dims[1]);
  // The lookup position is formed in index space (voxel index plus the
  // displacement over the spacing), so a zero field reads back each voxel
  // bitwise and constant integer-voxel shifts stay exact for any spacing.
  detail::parallel_chunks(
      n, 65536, options.threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
          const Vec3& v = field.field[i];
          const double u[3] = {
              static_cast<double>(i % nx) + sign * v[0] / g.spacing[0],
              static_cast<double>((i / nx) % ny) + sign * v[1] / g.spacing[1],
              static_cast<double>(i / (nx * ny)) + sign * v[2] / g.spacing[2]};
          out.samples[i] = sample_at_index(source, u, options.oob_value);
        }
      });
  return out;
}

}  // namespace gpwarp
