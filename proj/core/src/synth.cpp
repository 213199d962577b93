#include "gpwarp/synth.hpp"

#include "gpwarp/errors.hpp"
#include "gpwarp/rng.hpp"
#include "gpwarp/warp.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

namespace gpwarp {

namespace {

std::vector<std::size_t> sample_indices_without_replacement(std::size_t population,
                                                            std::size_t n, Rng& rng) {
  // Floyd's algorithm; the returned indices are sorted ascending so the
  // draw is canonical regardless of insertion order.
  std::set<std::size_t> chosen;
  for (std::size_t j = population - n; j < population; ++j) {
    const auto t = static_cast<std::size_t>(rng.below(j + 1));
    if (!chosen.insert(t).second) chosen.insert(j);
  }
  return {chosen.begin(), chosen.end()};
}

std::int64_t round_half_even(double x) {
  const double fl = std::floor(x);
  const double diff = x - fl;
  if (diff > 0.5) return static_cast<std::int64_t>(fl) + 1;
  if (diff < 0.5) return static_cast<std::int64_t>(fl);
  const auto i = static_cast<std::int64_t>(fl);
  return (i % 2 == 0) ? i : i + 1;
}

}  // namespace

Volume make_phantom(const Grid& grid, PhantomKind kind, std::uint64_t seed) {
  grid.validate();
  Volume vol;
  vol.grid = grid;
  const std::size_t n = grid.voxel_count();
  vol.samples.resize(n);

  if (kind == PhantomKind::GradientRamp) {
    for (std::size_t i = 0; i < n; ++i) {
      const Vec3 p = voxel_center(grid, i);
      vol.samples[i] = p[0] + 2.0 * p[1] + 3.0 * p[2];
    }
    return vol;
  }

  // Three seeded ellipsoids; draw order is fixed (center xyz, then semi xyz).
  Rng rng(seed);
  const Vec3 extent = grid.world_extent();
  struct Ellipsoid {
    Vec3 center;
    Vec3 inv_semi_sq;
  };
  Ellipsoid blobs[3];
  for (auto& e : blobs) {
    for (int a = 0; a < 3; ++a)
      e.center[a] = grid.origin[a] + extent[a] * rng.uniform(0.25, 0.75);
    for (int a = 0; a < 3; ++a) {
      const double semi = std::max(grid.spacing[a], extent[a] * rng.uniform(0.15, 0.35));
      e.inv_semi_sq[a] = 1.0 / (semi * semi);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 p = voxel_center(grid, i);
    bool inside = false;
    for (const auto& e : blobs) {
      const Vec3 c = p - e.center;
      if (c.cwiseProduct(c).dot(e.inv_semi_sq) <= 1.0) {
        inside = true;
        break;
      }
    }
    vol.samples[i] = inside ? 255.0 : 0.0;
  }
  return vol;
}

Vec3 BumpField::operator()(const Vec3& x) const {
  const double d2 = (x - center).squaredNorm();
  return amplitude * std::exp(-d2 / (2.0 * radius * radius));
}

BumpField make_bump_deformation(const Vec3& center, const Vec3& amplitude,
                                double radius) {
  if (!(radius > 0.0) || !std::isfinite(radius))
    throw InvalidInput("bump radius must be positive");
  if (!all_finite(center) || !all_finite(amplitude))
    throw InvalidInput("bump parameters must be finite");
  return BumpField{center, amplitude, radius};
}

DenseFieldResult evaluate_field_on_grid(const AnalyticField& field, const Grid& grid) {
  grid.validate();
  DenseFieldResult result;
  result.grid = grid;
  const std::size_t n = grid.voxel_count();
  result.field.resize(n);
  for (std::size_t i = 0; i < n; ++i) result.field[i] = field(voxel_center(grid, i));
  return result;
}

SparseCorrespondence sample_landmarks(const AnalyticField& field, const Grid& grid,
                                      std::size_t n, std::uint64_t seed) {
  grid.validate();
  const std::size_t total = grid.voxel_count();
  if (n < 1) throw InvalidInput("need at least one landmark");
  if (n > total) throw InvalidInput("more landmarks than grid voxels");

  Rng rng(seed);
  const auto indices = sample_indices_without_replacement(total, n, rng);

  SparseCorrespondence corr;
  corr.dim = grid.dim;
  corr.source_points.reserve(n);
  corr.matched_points.reserve(n);
  corr.displacements.reserve(n);
  for (const std::size_t idx : indices) {
    const Vec3 x = voxel_center(grid, idx);
    const Vec3 v = field(x);
    const Vec3 matched = x + v;
    corr.source_points.push_back(x);
    corr.matched_points.push_back(matched);
    corr.displacements.push_back(matched - x);  // exact by construction
  }
  corr.validate();
  return corr;
}

SparseCorrespondence subsample(const SparseCorrespondence& corr, double fraction,
                               std::uint64_t seed) {
  corr.validate();
  if (!(fraction > 0.0) || fraction > 1.0)
    throw InvalidInput("subsample fraction must be in (0, 1]");
  const std::size_t n = corr.size();
  auto m = static_cast<std::size_t>(
      std::max<std::int64_t>(1, round_half_even(fraction * static_cast<double>(n))));
  if (m > n) m = n;

  Rng rng(seed);
  const auto indices = sample_indices_without_replacement(n, m, rng);

  SparseCorrespondence out;
  out.dim = corr.dim;
  out.source_points.reserve(m);
  out.matched_points.reserve(m);
  out.displacements.reserve(m);
  if (corr.target_points) out.target_points.emplace();
  for (const std::size_t i : indices) {
    out.source_points.push_back(corr.source_points[i]);
    out.matched_points.push_back(corr.matched_points[i]);
    out.displacements.push_back(corr.displacements[i]);
    if (corr.target_points && i < corr.target_points->size())
      out.target_points->push_back((*corr.target_points)[i]);
  }
  return out;
}

SyntheticCase make_synthetic_case(const Grid& grid, std::uint64_t seed,
                                  const SyntheticCaseParams& params) {
  grid.validate();
  if (params.feature_count < 2) throw InvalidInput("need at least 2 features");
  if (!(params.used_fraction > 0.0) || params.used_fraction > 1.0)
    throw InvalidInput("used fraction must be in (0, 1]");

  // Fixed sub-seed derivation so the whole case is a pure function of seed.
  SplitMix64 sm(seed);
  const std::uint64_t phantom_seed = sm.next();
  const std::uint64_t bump_seed = sm.next();
  const std::uint64_t feature_seed = sm.next();
  const std::uint64_t subsample_seed = sm.next();

  SyntheticCase out;
  out.phantom = make_phantom(grid, PhantomKind::BinaryBlob, phantom_seed);

  const Vec3 extent = grid.world_extent();
  double min_extent = extent[0];
  for (int a = 1; a < grid.dim; ++a) min_extent = std::min(min_extent, extent[a]);

  Rng rng(bump_seed);
  Vec3 center;
  for (int a = 0; a < 3; ++a)
    center[a] = a < grid.dim ? grid.origin[a] + extent[a] * rng.uniform(0.35, 0.65)
                             : grid.origin[a];
  Vec3 direction = Vec3::Zero();
  for (;;) {
    for (int a = 0; a < grid.dim; ++a) direction[a] = rng.uniform(-1.0, 1.0);
    const double norm = direction.norm();
    if (norm >= 0.05 && norm <= 1.0) {
      direction /= norm;
      break;
    }
  }
  const double radius = min_extent * rng.uniform(0.18, 0.30);
  const double magnitude = min_extent * rng.uniform(0.06, 0.10);
  out.bump = make_bump_deformation(center, direction * magnitude, radius);

  out.true_field = evaluate_field_on_grid(out.bump, grid);
  WarpOptions warp_options;
  warp_options.oob_value = params.oob_value;
  out.target = warp_image(out.phantom, out.true_field, warp_options);

  out.features = sample_landmarks(out.bump, grid, params.feature_count, feature_seed);
  out.landmarks = subsample(out.features, params.used_fraction, subsample_seed);
  return out;
}

}  // namespace gpwarp
