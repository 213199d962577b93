#include "gpwarp/errors.hpp"
#include "gpwarp/metrics.hpp"

#include "support/oracles.hpp"
#include "support/test_support.hpp"

#include <doctest.h>

#include <cmath>

using namespace gpwarp;
using doctest::Approx;

namespace {

Volume two_voxels(double a, double b) {
  Volume v;
  v.grid.dims = {2, 1, 1};
  v.samples = {a, b};
  return v;
}

}  // namespace

TEST_CASE("rmse on small closed-form cases") {
  CHECK(rmse(two_voxels(1, 2), two_voxels(1, 2)) == 0.0);
  CHECK(rmse(two_voxels(4, 5), two_voxels(1, 2)) == Approx(3.0).epsilon(1e-15));
  CHECK(rmse(two_voxels(0, 0), two_voxels(3, 4)) ==
        Approx(std::sqrt(12.5)).epsilon(1e-15));
}

TEST_CASE("mismatch_fraction counts voxels beyond the tolerance") {
  Volume a;
  a.grid.dims = {2, 2, 2};
  a.samples = {0, 0, 0, 0, 255, 255, 255, 255};
  Volume b = a;
  CHECK(mismatch_fraction(a, b) == 0.0);

  for (auto& s : b.samples) s += 1.0;
  CHECK(mismatch_fraction(a, b) == 1.0);

  b = a;
  b.samples[1] = 255;
  b.samples[6] = 0;
  CHECK(mismatch_fraction(a, b) == 0.25);
  CHECK(mismatch_fraction(a, b, 300.0) == 0.0);
}

TEST_CASE("mean_abs_diff averages absolute differences") {
  CHECK(mean_abs_diff(two_voxels(1, 1), two_voxels(1, 1)) == 0.0);
  CHECK(mean_abs_diff(two_voxels(4, 5), two_voxels(1, 2)) == Approx(3.0));
  CHECK(mean_abs_diff(two_voxels(0, 10), two_voxels(4, 0)) == Approx(7.0));
}

TEST_CASE("volume metrics reject mismatched grids and are symmetric") {
  Rng rng(5);
  Grid g;
  g.dims = {4, 3, 2};
  const Volume a = test::random_volume(rng, g, -3, 3);
  const Volume b = test::random_volume(rng, g, -3, 3);

  CHECK(rmse(a, b) == rmse(b, a));
  CHECK(mean_abs_diff(a, b) == mean_abs_diff(b, a));
  CHECK(mismatch_fraction(a, b, 0.7) == mismatch_fraction(b, a, 0.7));
  CHECK(rmse(a, b) >= mean_abs_diff(a, b));  // Jensen

  Volume c = b;
  c.grid.spacing = Vec3(2, 1, 1);
  CHECK_THROWS_AS(rmse(a, c), InvalidInput);
  CHECK_THROWS_AS(mean_abs_diff(a, c), InvalidInput);
  CHECK_THROWS_AS(mismatch_fraction(a, c, 0.5), InvalidInput);
}

TEST_CASE("mhd on closed-form cases") {
  const std::vector<Vec3> a = {Vec3(0, 0, 0), Vec3(1, 1, 1)};
  CHECK(mhd(a, a) == 0.0);

  const std::vector<Vec3> p = {Vec3(0, 0, 0)};
  const std::vector<Vec3> q = {Vec3(3, 4, 0)};
  CHECK(mhd(p, q) == Approx(5.0).epsilon(1e-15));

  CHECK_THROWS_AS(mhd({}, a), InvalidInput);
}

TEST_CASE("mhd equals the brute-force oracle and is symmetric bitwise") {
  Rng rng(7);
  for (int rep = 0; rep < 20; ++rep) {
    const auto a = test::random_points(rng, 20, -10.0, 10.0);
    const auto b = test::random_points(rng, 17, -10.0, 10.0);
    const double ours = mhd(a, b);
    CHECK(ours == oracle::mhd_bruteforce(a, b));
    CHECK(ours == mhd(b, a));
    CHECK(ours >= 0.0);
  }
}
