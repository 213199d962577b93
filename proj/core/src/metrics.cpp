#include "gpwarp/metrics.hpp"

#include "gpwarp/errors.hpp"

#include <cmath>
#include <limits>

namespace gpwarp {

namespace {

void require_same_grid(const Volume& a, const Volume& b) {
  if (!(a.grid == b.grid)) throw InvalidInput("volume grids do not match");
  if (a.samples.size() != b.samples.size())
    throw InvalidInput("volume sample counts do not match");
}

double directed_mean_distance(std::span<const Vec3> from, std::span<const Vec3> to) {
  double sum = 0.0;
  for (const Vec3& p : from) {
    double best = std::numeric_limits<double>::infinity();
    for (const Vec3& q : to) {
      const double d = (p - q).norm();
      if (d < best) best = d;
    }
    sum += best;
  }
  return sum / static_cast<double>(from.size());
}

}  // namespace

double rmse(const Volume& a, const Volume& b) {
  require_same_grid(a, b);
  double sum = 0.0;
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    const double d = a.samples[i] - b.samples[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(a.samples.size()));
}

double mismatch_fraction(const Volume& a, const Volume& b, double tol) {
  require_same_grid(a, b);
  if (!(tol >= 0.0)) throw InvalidInput("mismatch tolerance must be >= 0");
  std::size_t count = 0;
  for (std::size_t i = 0; i < a.samples.size(); ++i)
    if (std::abs(a.samples[i] - b.samples[i]) > tol) ++count;
  return static_cast<double>(count) / static_cast<double>(a.samples.size());
}

double mean_abs_diff(const Volume& a, const Volume& b) {
  require_same_grid(a, b);
  double sum = 0.0;
  for (std::size_t i = 0; i < a.samples.size(); ++i)
    sum += std::abs(a.samples[i] - b.samples[i]);
  return sum / static_cast<double>(a.samples.size());
}

double mhd(std::span<const Vec3> a, std::span<const Vec3> b) {
  if (a.empty() || b.empty()) throw InvalidInput("empty point set");
  const double ab = directed_mean_distance(a, b);
  const double ba = directed_mean_distance(b, a);
  return ab > ba ? ab : ba;
}

}  // namespace gpwarp
