#pragma once

#include "gpwarp/geometry.hpp"

#include <Eigen/Core>

#include <span>
#include <vector>

namespace gpwarp {

// Squared-exponential kernel k(p, q) = sigma^2 * exp(-|p-q|^2 / (2 l^2)).
// `jitter` is a relative diagonal stabilizer: jitter * sigma^2 is added to
// the training covariance. The kernel itself is noise-free.
struct KernelParams {
  double sigma = 1.0;
  double length_scale = 1.0;
  double jitter = 1e-8;

  static constexpr double kSigmaFloor = 1e-6;
  static constexpr double kLengthScaleFloor = 1e-6;

  void validate() const;
};

inline constexpr double kDefaultJitter = 1e-8;
// Ceiling for the x10 jitter escalation on Cholesky failure.
inline constexpr double kMaxJitter = 1e-2;

double se_kernel(const Vec3& p, const Vec3& q, const KernelParams& params);

// M[i][j] = se_kernel(rows[i], cols[j]). When rows and cols alias the same
// sequence the upper triangle is mirrored, so M == M^T holds bitwise.
Eigen::MatrixXd build_covariance(std::span<const Vec3> rows,
                                 std::span<const Vec3> cols,
                                 const KernelParams& params);

// Trained GP regressor. The displacement axes are modeled as independent
// scalar GPs sharing one kernel and one Cholesky factorization; the
// posterior mean is K_*^T alpha and the posterior variance is the shared
// per-axis scalar k(x,x) - |L^-1 k_*|^2.
struct GpModel {
  KernelParams params;
  Eigen::Matrix<double, Eigen::Dynamic, 3> train_points;
  Eigen::MatrixXd chol_lower;  // L with L L^T = K + jitter * sigma^2 * I
  Eigen::MatrixXd alpha;       // n x dim, (K + jitter * sigma^2 * I)^-1 D
  double jitter_used = 0.0;    // after any escalation
  int dim = 3;

  std::size_t size() const { return static_cast<std::size_t>(train_points.rows()); }
};

// Exact GP training via dense Cholesky. On factorization failure the jitter
// escalates x10 up to kMaxJitter before raising NumericalFailure.
GpModel fit_gp(const SparseCorrespondence& corr, const KernelParams& params,
               FieldAnchor anchor = FieldAnchor::SourcePoints);

std::vector<Vec3> predict_mean(const GpModel& model, std::span<const Vec3> queries);

// Posterior variance per query, clamped to [0, sigma^2].
std::vector<double> predict_variance(const GpModel& model,
                                     std::span<const Vec3> queries);

struct DenseFieldOptions {
  std::size_t chunk_size = 65536;  // query points per batch
  int threads = 0;                 // 0 = all available cores
  bool with_variance = true;
};

// Posterior mean (and variance unless disabled) at every voxel center.
// Output is bitwise independent of chunk_size and thread count.
DenseFieldResult dense_field(const GpModel& model, const Grid& grid,
                             const DenseFieldOptions& options = {});

struct LmlResult {
  double value;
  Eigen::Vector2d gradient;  // d/d(log sigma), d/d(log length_scale)
};

// Log marginal likelihood of the displacements under the zero-mean GP,
// summed over the displacement axes, with its analytic log-space gradient.
LmlResult log_marginal_likelihood(const SparseCorrespondence& corr,
                                  const KernelParams& params,
                                  FieldAnchor anchor = FieldAnchor::SourcePoints);

}  // namespace gpwarp
