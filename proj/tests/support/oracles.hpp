#pragma once

// Independent reference computations the tests check the library against.
// These deliberately avoid the library's solution paths: full-matrix
// inverses instead of Cholesky solves, eigendecompositions for log
// determinants, SVD least squares, hand-rolled loops for warps and MHD.

#include "gpwarp/bspline.hpp"
#include "gpwarp/geometry.hpp"
#include "gpwarp/gp.hpp"
#include "gpwarp/warp.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <vector>

namespace gpwarp::oracle {

struct DensePosterior {
  std::vector<Vec3> mean;
  std::vector<double> variance;  // unclamped diagonal of K** - K*^T Ktilde^-1 K*
};

// Posterior via explicit full-matrix inversion of the jittered kernel.
inline DensePosterior gp_dense_posterior(const SparseCorrespondence& corr,
                                         const KernelParams& params,
                                         std::span<const Vec3> queries,
                                         FieldAnchor anchor = FieldAnchor::SourcePoints) {
  const auto pts = anchor_points(corr, anchor);
  const auto n = static_cast<Eigen::Index>(pts.size());
  Eigen::MatrixXd ktilde = build_covariance(pts, pts, params);
  ktilde.diagonal().array() += params.jitter * params.sigma * params.sigma;
  const Eigen::MatrixXd kinv = Eigen::FullPivLU<Eigen::MatrixXd>(ktilde).inverse();

  Eigen::MatrixXd d(n, 3);
  for (Eigen::Index i = 0; i < n; ++i)
    d.row(i) = corr.displacements[static_cast<std::size_t>(i)].transpose();

  const Eigen::MatrixXd kstar = build_covariance(pts, queries, params);  // n x q
  const Eigen::MatrixXd mu = kstar.transpose() * (kinv * d);             // q x 3
  const Eigen::MatrixXd kss = build_covariance(queries, queries, params);
  const Eigen::MatrixXd cov = kss - kstar.transpose() * kinv * kstar;

  DensePosterior out;
  out.mean.resize(queries.size());
  out.variance.resize(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    out.mean[i] = mu.row(static_cast<Eigen::Index>(i)).transpose();
    out.variance[i] = cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i));
  }
  return out;
}

// LML value through an eigendecomposition (no Cholesky anywhere).
inline double lml_value_eig(const SparseCorrespondence& corr,
                            const KernelParams& params,
                            FieldAnchor anchor = FieldAnchor::SourcePoints) {
  const auto pts = anchor_points(corr, anchor);
  const auto n = static_cast<Eigen::Index>(pts.size());
  Eigen::MatrixXd ktilde = build_covariance(pts, pts, params);
  ktilde.diagonal().array() += params.jitter * params.sigma * params.sigma;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(ktilde);
  const Eigen::VectorXd lambda = es.eigenvalues();
  const double log_det = lambda.array().log().sum();
  const Eigen::MatrixXd vt = es.eigenvectors().transpose();

  double value = 0.0;
  const double log_two_pi = std::log(2.0 * 3.14159265358979323846);
  for (int axis = 0; axis < corr.dim; ++axis) {
    Eigen::VectorXd d(n);
    for (Eigen::Index i = 0; i < n; ++i)
      d[i] = corr.displacements[static_cast<std::size_t>(i)][axis];
    const Eigen::VectorXd proj = vt * d;
    const double quad = (proj.array().square() / lambda.array()).sum();
    value += -0.5 * quad - 0.5 * log_det - 0.5 * static_cast<double>(n) * log_two_pi;
  }
  return value;
}

// Central finite differences of the LML value in (log sigma, log l).
inline Eigen::Vector2d lml_fd_gradient(const SparseCorrespondence& corr,
                                       const KernelParams& params, double h = 1e-5) {
  auto value_at = [&](double dls, double dll) {
    KernelParams p = params;
    p.sigma = std::exp(std::log(params.sigma) + dls);
    p.length_scale = std::exp(std::log(params.length_scale) + dll);
    return log_marginal_likelihood(corr, p).value;
  };
  return Eigen::Vector2d(
      (value_at(h, 0.0) - value_at(-h, 0.0)) / (2.0 * h),
      (value_at(0.0, h) - value_at(0.0, -h)) / (2.0 * h));
}

// Modified Hausdorff distance, written independently of metrics.cpp.
inline double mhd_bruteforce(std::span<const Vec3> a, std::span<const Vec3> b) {
  auto directed = [](std::span<const Vec3> u, std::span<const Vec3> v) {
    double total = 0.0;
    for (const Vec3& p : u) {
      double best = std::numeric_limits<double>::infinity();
      for (const Vec3& q : v) best = std::min(best, (p - q).norm());
      total += best;
    }
    return total / static_cast<double>(u.size());
  };
  return std::max(directed(a, b), directed(b, a));
}

// Ridge least squares for the FFD coefficients through an SVD of the
// stacked system [A; sqrt(lambda) I]. The design matrix is probed from the
// fitted lattice by evaluating one-hot coefficient vectors, so the oracle
// shares the basis but not the solver.
inline std::vector<Vec3> bspline_ls_svd(const BsplineField& lattice,
                                        std::span<const Vec3> anchors,
                                        std::span<const Vec3> displacements,
                                        double lambda) {
  const auto m = static_cast<Eigen::Index>(lattice.coefficients.size());
  const auto n = static_cast<Eigen::Index>(anchors.size());
  Eigen::MatrixXd a(n, m);
  BsplineField probe = lattice;
  for (Eigen::Index j = 0; j < m; ++j) {
    for (auto& c : probe.coefficients) c = Vec3::Zero();
    probe.coefficients[static_cast<std::size_t>(j)] = Vec3(1.0, 0.0, 0.0);
    for (Eigen::Index i = 0; i < n; ++i)
      a(i, j) = eval_bspline_at(probe, anchors[static_cast<std::size_t>(i)])[0];
  }
  Eigen::MatrixXd stacked(n + m, m);
  stacked.topRows(n) = a;
  stacked.bottomRows(m) =
      std::sqrt(lambda) * Eigen::MatrixXd::Identity(m, m);
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n + m, 3);
  for (Eigen::Index i = 0; i < n; ++i)
    rhs.row(i) = displacements[static_cast<std::size_t>(i)].transpose();
  const Eigen::MatrixXd sol =
      stacked.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(rhs);
  std::vector<Vec3> out(static_cast<std::size_t>(m));
  for (Eigen::Index j = 0; j < m; ++j) out[static_cast<std::size_t>(j)] = sol.row(j).transpose();
  return out;
}

// Per-voxel warp reimplementation with its own interpolation loop.
inline Volume warp_bruteforce(const Volume& source, const DenseFieldResult& field,
                              WarpConvention convention, double fill) {
  const Grid& g = field.grid;
  Volume out;
  out.grid = g;
  out.samples.resize(g.voxel_count());
  const double sign = convention == WarpConvention::PullbackTargetAnchored ? -1.0 : 1.0;
  std::size_t linear = 0;
  for (std::int64_t k = 0; k < g.dims[2]; ++k) {
    for (std::int64_t j = 0; j < g.dims[1]; ++j) {
      for (std::int64_t i = 0; i < g.dims[0]; ++i, ++linear) {
        const Vec3 y = g.origin + Vec3(i * g.spacing[0], j * g.spacing[1], k * g.spacing[2]);
        const Vec3 q = y + sign * field.field[linear];
        double value = fill;
        bool inside = true;
        double u[3];
        for (int a = 0; a < 3; ++a) {
          u[a] = (q[a] - g.origin[a]) / g.spacing[a];
          if (a < g.dim && (!(u[a] >= 0.0) || u[a] > static_cast<double>(g.dims[a] - 1)))
            inside = false;
          if (a >= g.dim) u[a] = 0.0;
        }
        if (inside) {
          value = 0.0;
          std::int64_t c0[3];
          double t[3];
          for (int a = 0; a < 3; ++a) {
            c0[a] = static_cast<std::int64_t>(std::floor(u[a]));
            if (c0[a] >= g.dims[a] - 1) c0[a] = std::max<std::int64_t>(0, g.dims[a] - 2);
            t[a] = u[a] - static_cast<double>(c0[a]);
          }
          for (int dz = 0; dz < 2; ++dz)
            for (int dy = 0; dy < 2; ++dy)
              for (int dx = 0; dx < 2; ++dx) {
                const double w = (dx ? t[0] : 1.0 - t[0]) * (dy ? t[1] : 1.0 - t[1]) *
                                 (dz ? t[2] : 1.0 - t[2]);
                if (w == 0.0) continue;
                const Index3 idx{std::min(c0[0] + dx, g.dims[0] - 1),
                                 std::min(c0[1] + dy, g.dims[1] - 1),
                                 std::min(c0[2] + dz, g.dims[2] - 1)};
                value += w * source.samples[g.linear_index(idx)];
              }
        }
        out.samples[linear] = value;
      }
    }
  }
  return out;
}

}  // namespace gpwarp::oracle
