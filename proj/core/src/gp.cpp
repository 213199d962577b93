#include "gpwarp/gp.hpp"

#include "gpwarp/errors.hpp"
#include "parallel_for.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <numbers>
#include <string>

namespace gpwarp {

void KernelParams::validate() const {
  if (!(sigma >= kSigmaFloor) || !std::isfinite(sigma))
    throw InvalidInput("sigma must be >= 1e-6 and finite");
  if (!(length_scale >= kLengthScaleFloor) || !std::isfinite(length_scale))
    throw InvalidInput("length_scale must be >= 1e-6 and finite");
  if (!(jitter >= 0.0) || !std::isfinite(jitter))
    throw InvalidInput("jitter must be non-negative and finite");
}

double se_kernel(const Vec3& p, const Vec3& q, const KernelParams& params) {
  const double d2 = (p - q).squaredNorm();
  const double l = params.length_scale;
  return params.sigma * params.sigma * std::exp(-d2 / (2.0 * l * l));
}

Eigen::MatrixXd build_covariance(std::span<const Vec3> rows,
                                 std::span<const Vec3> cols,
                                 const KernelParams& params) {
  if (rows.empty() || cols.empty())
    throw InvalidInput("covariance needs non-empty point sequences");
  const auto nr = static_cast<Eigen::Index>(rows.size());
  const auto nc = static_cast<Eigen::Index>(cols.size());
  Eigen::MatrixXd m(nr, nc);
  const bool aliased = rows.data() == cols.data() && nr == nc;
  if (aliased) {
    for (Eigen::Index i = 0; i < nr; ++i) {
      for (Eigen::Index j = i; j < nc; ++j) {
        const double v = se_kernel(rows[static_cast<std::size_t>(i)],
                                   cols[static_cast<std::size_t>(j)], params);
        m(i, j) = v;
        m(j, i) = v;
      }
    }
  } else {
    for (Eigen::Index i = 0; i < nr; ++i)
      for (Eigen::Index j = 0; j < nc; ++j)
        m(i, j) = se_kernel(rows[static_cast<std::size_t>(i)],
                            cols[static_cast<std::size_t>(j)], params);
  }
  return m;
}

namespace {

struct JitteredCholesky {
  Eigen::MatrixXd lower;
  double jitter;
};

// Factor K + j * sigma^2 * I, escalating j x10 on failure up to kMaxJitter.
JitteredCholesky cholesky_with_escalation(const Eigen::MatrixXd& kernel_matrix,
                                          const KernelParams& params) {
  const double sigma_sq = params.sigma * params.sigma;
  double j = params.jitter;
  for (;;) {
    Eigen::MatrixXd a = kernel_matrix;
    a.diagonal().array() += j * sigma_sq;
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() == Eigen::Success) return {llt.matrixL(), j};
    if (j >= kMaxJitter)
      throw NumericalFailure("kernel matrix not positive definite (final jitter " +
                             std::to_string(j) + ")");
    j = (j == 0.0) ? kDefaultJitter : j * 10.0;
    if (j > kMaxJitter) j = kMaxJitter;
  }
}

Eigen::Matrix<double, Eigen::Dynamic, 3> pack_points(std::span<const Vec3> pts) {
  Eigen::Matrix<double, Eigen::Dynamic, 3> m(static_cast<Eigen::Index>(pts.size()), 3);
  for (std::size_t i = 0; i < pts.size(); ++i)
    m.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();
  return m;
}

Eigen::MatrixXd pack_displacements(const SparseCorrespondence& corr) {
  const auto n = static_cast<Eigen::Index>(corr.size());
  Eigen::MatrixXd d(n, corr.dim);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int a = 0; a < corr.dim; ++a)
      d(i, a) = corr.displacements[static_cast<std::size_t>(i)][a];
  return d;
}

struct PredictScratch {
  Eigen::VectorXd r2;
  Eigen::VectorXd k;
  Eigen::VectorXd v;
};

// Shared by predict_mean, predict_variance and dense_field so every entry
// point produces identical values for identical queries.
void predict_point(const GpModel& model, const Vec3& q, Vec3* mean_out,
                   double* var_out, PredictScratch& s) {
  const double sigma_sq = model.params.sigma * model.params.sigma;
  const double l = model.params.length_scale;
  const double inv_two_l_sq = 1.0 / (2.0 * l * l);
  s.r2 = (model.train_points.rowwise() - q.transpose()).rowwise().squaredNorm();
  s.k = (s.r2.array() * -inv_two_l_sq).exp() * sigma_sq;
  if (mean_out) {
    Vec3 mu = Vec3::Zero();
    for (int a = 0; a < model.dim; ++a) mu[a] = s.k.dot(model.alpha.col(a));
    *mean_out = mu;
  }
  if (var_out) {
    s.v = s.k;
    model.chol_lower.triangularView<Eigen::Lower>().solveInPlace(s.v);
    double var = sigma_sq - s.v.squaredNorm();
    if (var < 0.0) var = 0.0;
    if (var > sigma_sq) var = sigma_sq;
    *var_out = var;
  }
}

}  // namespace

GpModel fit_gp(const SparseCorrespondence& corr, const KernelParams& params,
               FieldAnchor anchor) {
  params.validate();
  corr.validate();
  const auto pts = anchor_points(corr, anchor);
  const Eigen::MatrixXd kernel = build_covariance(pts, pts, params);
  auto chol = cholesky_with_escalation(kernel, params);

  GpModel model;
  model.params = params;
  model.dim = corr.dim;
  model.train_points = pack_points(pts);
  model.jitter_used = chol.jitter;
  const Eigen::MatrixXd d = pack_displacements(corr);
  Eigen::MatrixXd alpha = chol.lower.triangularView<Eigen::Lower>().solve(d);
  chol.lower.transpose().triangularView<Eigen::Upper>().solveInPlace(alpha);
  model.alpha = std::move(alpha);
  model.chol_lower = std::move(chol.lower);
  return model;
}

std::vector<Vec3> predict_mean(const GpModel& model, std::span<const Vec3> queries) {
  std::vector<Vec3> out(queries.size());
  PredictScratch s;
  for (std::size_t i = 0; i < queries.size(); ++i)
    predict_point(model, queries[i], &out[i], nullptr, s);
  return out;
}

std::vector<double> predict_variance(const GpModel& model,
                                     std::span<const Vec3> queries) {
  std::vector<double> out(queries.size());
  PredictScratch s;
  for (std::size_t i = 0; i < queries.size(); ++i)
    predict_point(model, queries[i], nullptr, &out[i], s);
  return out;
}

DenseFieldResult dense_field(const GpModel& model, const Grid& grid,
                             const DenseFieldOptions& options) {
  grid.validate();
  if (grid.dim != model.dim) throw InvalidInput("grid dim does not match model dim");
  if (options.chunk_size < 1) throw InvalidInput("chunk_size must be >= 1");

  DenseFieldResult result;
  result.grid = grid;
  const std::size_t n = grid.voxel_count();
  result.field.resize(n);
  if (options.with_variance) result.uncertainty.resize(n);

  detail::parallel_chunks(n, options.chunk_size, options.threads,
                          [&](std::size_t begin, std::size_t end) {
                            PredictScratch s;
                            for (std::size_t i = begin; i < end; ++i) {
                              const Vec3 q = voxel_center(grid, i);
                              predict_point(model, q, &result.field[i],
                                            options.with_variance
                                                ? &result.uncertainty[i]
                                                : nullptr,
                                            s);
                            }
                          });
  return result;
}

LmlResult log_marginal_likelihood(const SparseCorrespondence& corr,
                                  const KernelParams& params, FieldAnchor anchor) {
  params.validate();
  corr.validate();
  const auto pts = anchor_points(corr, anchor);
  const auto n = static_cast<Eigen::Index>(pts.size());
  const int dim = corr.dim;

  // K without jitter and the squared-distance matrix for the l-derivative.
  Eigen::MatrixXd kernel(n, n);
  Eigen::MatrixXd dist_sq(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      const double d2 =
          (pts[static_cast<std::size_t>(i)] - pts[static_cast<std::size_t>(j)])
              .squaredNorm();
      const double v = se_kernel(pts[static_cast<std::size_t>(i)],
                                 pts[static_cast<std::size_t>(j)], params);
      dist_sq(i, j) = d2;
      dist_sq(j, i) = d2;
      kernel(i, j) = v;
      kernel(j, i) = v;
    }
  }

  const auto chol = cholesky_with_escalation(kernel, params);
  const Eigen::MatrixXd d = pack_displacements(corr);

  // W = L^-1 D, so D^T Ktilde^-1 D = W^T W columnwise.
  Eigen::MatrixXd w = chol.lower.triangularView<Eigen::Lower>().solve(d);
  const Eigen::VectorXd quad = w.colwise().squaredNorm();
  const double log_det = 2.0 * chol.lower.diagonal().array().log().sum();

  const double log_two_pi = std::log(2.0 * std::numbers::pi);
  const double value = -0.5 * quad.sum() -
                       0.5 * dim * log_det -
                       0.5 * dim * static_cast<double>(n) * log_two_pi;

  // alpha = Ktilde^-1 D and Ktilde^-1, for the analytic gradient
  //   d(lml)/d(theta) = 1/2 sum_a tr((alpha_a alpha_a^T - Ktilde^-1) dK/dtheta).
  Eigen::MatrixXd alpha = w;
  chol.lower.transpose().triangularView<Eigen::Upper>().solveInPlace(alpha);
  Eigen::MatrixXd kinv = Eigen::MatrixXd::Identity(n, n);
  chol.lower.triangularView<Eigen::Lower>().solveInPlace(kinv);
  chol.lower.transpose().triangularView<Eigen::Upper>().solveInPlace(kinv);

  // dKtilde/d(log sigma) = 2 Ktilde, since the jitter scales with sigma^2.
  const double grad_log_sigma = quad.sum() - static_cast<double>(dim * n);

  // dKtilde/d(log l) = K .* dist_sq / l^2 (jitter-free diagonal unaffected).
  const double inv_l_sq = 1.0 / (params.length_scale * params.length_scale);
  const Eigen::MatrixXd g = kernel.cwiseProduct(dist_sq) * inv_l_sq;
  double quad_l = 0.0;
  for (int a = 0; a < dim; ++a) quad_l += alpha.col(a).dot(g * alpha.col(a));
  const double trace_l = kinv.cwiseProduct(g).sum();
  const double grad_log_l = 0.5 * quad_l - 0.5 * dim * trace_l;

  LmlResult out;
  out.value = value;
  out.gradient = Eigen::Vector2d(grad_log_sigma, grad_log_l);
  return out;
}

}  // namespace gpwarp
