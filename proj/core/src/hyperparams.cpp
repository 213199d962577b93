#include "gpwarp/hyperparams.hpp"

#include "gpwarp/errors.hpp"
#include "gpwarp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gpwarp {

PairwiseDistanceStats pairwise_distance_stats(std::span<const Vec3> points) {
  if (points.size() < 2)
    throw InvalidInput("need at least 2 landmarks");
  double min_sq = std::numeric_limits<double>::infinity();
  double max_sq = 0.0;
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      const double d2 = (points[i] - points[j]).squaredNorm();
      min_sq = std::min(min_sq, d2);
      max_sq = std::max(max_sq, d2);
      sum += d2;
      ++pairs;
    }
  }
  return {min_sq, sum / static_cast<double>(pairs), max_sq};
}

Vec3 displacement_axis_stddev(const SparseCorrespondence& corr) {
  const auto n = static_cast<double>(corr.size());
  Vec3 mean = Vec3::Zero();
  for (const Vec3& d : corr.displacements) mean += d;
  mean /= n;
  Vec3 var = Vec3::Zero();
  for (const Vec3& d : corr.displacements) {
    const Vec3 c = d - mean;
    var += c.cwiseProduct(c);
  }
  var /= n;
  return var.cwiseSqrt();
}

namespace {

double apply_length_mode(double squared_distance, const MeanOptions& options) {
  const double raw = options.length_scale_sqrt ? std::sqrt(squared_distance)
                                               : squared_distance;
  return std::max(raw, KernelParams::kLengthScaleFloor);
}

}  // namespace

MeanEstimate estimate_mean(const SparseCorrespondence& corr,
                           const MeanOptions& options) {
  corr.validate();
  if (corr.size() < 2) throw InvalidInput("need at least 2 landmarks");

  const Vec3 stddev = displacement_axis_stddev(corr);
  double sigma = 0.0;
  for (int a = 0; a < corr.dim; ++a) sigma += stddev[a];
  sigma /= static_cast<double>(corr.dim);

  MeanEstimate out;
  out.sigma_floored = sigma < KernelParams::kSigmaFloor;
  out.params.sigma = std::max(sigma, KernelParams::kSigmaFloor);
  const auto stats = pairwise_distance_stats(corr.source_points);
  out.params.length_scale = apply_length_mode(stats.mean_sq, options);
  out.params.jitter = options.jitter;
  return out;
}

NmlEstimate estimate_nml(const SparseCorrespondence& corr, const KernelParams& init,
                         const NmlOptions& options) {
  corr.validate();
  if (corr.size() < 2) throw InvalidInput("need at least 2 landmarks");
  init.validate();

  const double jitter = init.jitter;
  struct Eval {
    double f;
    Eigen::Vector2d g;
  };
  auto evaluate = [&](const Eigen::Vector2d& theta) -> Eval {
    KernelParams p;
    p.sigma = std::exp(theta[0]);
    p.length_scale = std::exp(theta[1]);
    p.jitter = jitter;
    try {
      const LmlResult r = log_marginal_likelihood(corr, p);
      return {-r.value, -r.gradient};
    } catch (const NumericalFailure&) {
      return {std::numeric_limits<double>::infinity(), Eigen::Vector2d::Zero()};
    }
  };

  const double theta_lo = std::log(KernelParams::kSigmaFloor);
  const double theta_hi = 1e2;  // exp(100) is still finite

  Eigen::Vector2d theta(std::log(init.sigma), std::log(init.length_scale));
  Eval cur = evaluate(theta);
  if (!std::isfinite(cur.f)) throw InvalidInput("degenerate initialization");

  NmlEstimate out;
  Eigen::Vector2d best_theta = theta;
  double best_f = cur.f;
  bool converged = cur.g.lpNorm<Eigen::Infinity>() < options.gradient_tolerance;

  double next_step = 1.0;
  int it = 0;
  while (!converged && it < options.max_iterations) {
    ++it;
    const double g_norm_sq = cur.g.squaredNorm();
    double t = next_step;
    bool accepted = false;
    for (int bt = 0; bt < 80 && t > 0.0; ++bt) {
      const Eigen::Vector2d cand =
          (theta - t * cur.g).cwiseMax(theta_lo).cwiseMin(theta_hi);
      const Eval e = evaluate(cand);
      if (std::isfinite(e.f) && e.f <= cur.f - 1e-4 * t * g_norm_sq) {
        theta = cand;
        cur = e;
        accepted = true;
        next_step = t * 2.0;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;
    if (cur.f < best_f) {
      best_f = cur.f;
      best_theta = theta;
    }
    if (cur.g.lpNorm<Eigen::Infinity>() < options.gradient_tolerance) converged = true;
  }

  out.params.sigma = std::exp(best_theta[0]);
  out.params.length_scale = std::exp(best_theta[1]);
  out.params.jitter = jitter;
  out.converged = converged;
  out.iterations = it;
  out.nml = best_f;
  return out;
}

void DgsConfig::validate() const {
  source.validate();
  target.validate();
  grid.validate();
  if (!(source.grid == target.grid))
    throw InvalidInput("dgs source and target grids must be identical");
  if (!(grid == target.grid))
    throw InvalidInput("dgs prediction grid must equal the target grid");
  if (!(jitter >= 0.0)) throw InvalidInput("jitter must be non-negative");
}

namespace {

std::vector<double> dedup_sorted(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace

DgsEstimate estimate_dgs(const SparseCorrespondence& corr, const DgsConfig& config) {
  corr.validate();
  if (corr.size() < 2) throw InvalidInput("need at least 2 landmarks");
  config.validate();

  const Vec3 stddev = displacement_axis_stddev(corr);
  double sigma_min = std::numeric_limits<double>::infinity();
  double sigma_max = 0.0;
  double sigma_mean = 0.0;
  for (int a = 0; a < corr.dim; ++a) {
    sigma_min = std::min(sigma_min, stddev[a]);
    sigma_max = std::max(sigma_max, stddev[a]);
    sigma_mean += stddev[a];
  }
  sigma_mean /= static_cast<double>(corr.dim);

  const auto stats = pairwise_distance_stats(corr.source_points);

  const auto floor_sigma = [](double s) {
    return std::max(s, KernelParams::kSigmaFloor);
  };
  const std::vector<double> sigmas = dedup_sorted(
      {floor_sigma(sigma_min), floor_sigma(sigma_mean), floor_sigma(sigma_max)});
  const std::vector<double> lengths = dedup_sorted(
      {apply_length_mode(stats.min_sq, config.mean_options),
       apply_length_mode(stats.mean_sq, config.mean_options),
       apply_length_mode(stats.max_sq, config.mean_options)});

  const FieldAnchor anchor = anchor_for(config.convention);
  DenseFieldOptions field_options;
  field_options.chunk_size = config.chunk_size;
  field_options.threads = config.threads;
  field_options.with_variance = false;  // the search objective ignores it
  WarpOptions warp_options;
  warp_options.convention = config.convention;
  warp_options.oob_value = config.oob_value;
  warp_options.threads = config.threads;

  DgsEstimate out;
  out.table.reserve(sigmas.size() * lengths.size());
  for (double s : sigmas) {
    for (double l : lengths) {
      KernelParams p;
      p.sigma = s;
      p.length_scale = l;
      p.jitter = config.jitter;
      double cell_rmse = std::numeric_limits<double>::infinity();
      try {
        const GpModel model = fit_gp(corr, p, anchor);
        const DenseFieldResult field = dense_field(model, config.grid, field_options);
        const Volume warped = warp_image(config.source, field, warp_options);
        cell_rmse = rmse(warped, config.target);
      } catch (const NumericalFailure&) {
        // infeasible cell, keep +inf
      }
      out.table.push_back({s, l, cell_rmse});
    }
  }

  const DgsCell* best = nullptr;
  for (const DgsCell& cell : out.table) {
    if (!std::isfinite(cell.rmse)) continue;
    if (best == nullptr || cell.rmse < best->rmse ||
        (cell.rmse == best->rmse &&
         (cell.length_scale < best->length_scale ||
          (cell.length_scale == best->length_scale && cell.sigma < best->sigma))))
      best = &cell;
  }
  if (best == nullptr) throw NumericalFailure("no feasible hyperparameters");

  out.params.sigma = best->sigma;
  out.params.length_scale = best->length_scale;
  out.params.jitter = config.jitter;
  return out;
}

}  // namespace gpwarp
