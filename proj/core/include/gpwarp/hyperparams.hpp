#pragma once

#include "gpwarp/geometry.hpp"
#include "gpwarp/gp.hpp"
#include "gpwarp/warp.hpp"

#include <span>
#include <vector>

namespace gpwarp {

// Squared pairwise distances over unordered point pairs i < j.
struct PairwiseDistanceStats {
  double min_sq;
  double mean_sq;
  double max_sq;
};
PairwiseDistanceStats pairwise_distance_stats(std::span<const Vec3> points);

// Population standard deviation (divisor n) of each displacement axis.
Vec3 displacement_axis_stddev(const SparseCorrespondence& corr);

struct MeanOptions {
  // The moment-based length scale is the mean *squared* pairwise distance,
  // taken literally; this switch uses its square root instead, giving a
  // quantity in length units.
  bool length_scale_sqrt = false;
  double jitter = kDefaultJitter;
};

struct MeanEstimate {
  KernelParams params;
  bool sigma_floored = false;  // all displacements identical
};

// sigma = mean per-axis displacement stddev, length scale from the pairwise
// distance statistics of the source points. Needs at least 2 landmarks.
MeanEstimate estimate_mean(const SparseCorrespondence& corr,
                           const MeanOptions& options = {});

struct NmlOptions {
  int max_iterations = 200;
  double gradient_tolerance = 1e-6;  // inf-norm in log-space
};

struct NmlEstimate {
  KernelParams params;
  bool converged = false;
  int iterations = 0;
  double nml = 0.0;  // negative log marginal likelihood at the result
};

// Minimizes the negative log marginal likelihood over (log sigma, log l)
// with gradient descent and a backtracking line search. Monotone: the
// returned value never exceeds the value at `init`.
NmlEstimate estimate_nml(const SparseCorrespondence& corr, const KernelParams& init,
                         const NmlOptions& options = {});

struct DgsConfig {
  Volume source;
  Volume target;
  Grid grid;  // prediction grid; must equal both volume grids
  WarpConvention convention = WarpConvention::PullbackTargetAnchored;
  double oob_value = 0.0;
  MeanOptions mean_options{};
  double jitter = kDefaultJitter;
  std::size_t chunk_size = 65536;
  int threads = 0;

  void validate() const;
};

struct DgsCell {
  double sigma;
  double length_scale;
  double rmse;  // +inf when the cell's factorization failed
};

struct DgsEstimate {
  KernelParams params;
  std::vector<DgsCell> table;  // row-major over the sigma x l candidate grid
};

// Discrete grid search over {min,mean,max} of the per-axis displacement
// stddevs x {min,mean,max} of the squared pairwise distances, scored by the
// RMSE of the warped source against the target. Ties break toward the
// smallest length scale, then the smallest sigma.
DgsEstimate estimate_dgs(const SparseCorrespondence& corr, const DgsConfig& config);

}  // namespace gpwarp
