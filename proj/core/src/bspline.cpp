#include "gpwarp/bspline.hpp"

#include "gpwarp/errors.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cmath>

namespace gpwarp {

std::array<double, 4> cubic_bspline_weights(double t) {
  const double t2 = t * t;
  const double t3 = t2 * t;
  const double mt = 1.0 - t;
  return {mt * mt * mt / 6.0,
          (3.0 * t3 - 6.0 * t2 + 4.0) / 6.0,
          (-3.0 * t3 + 3.0 * t2 + 3.0 * t + 1.0) / 6.0,
          t3 / 6.0};
}

Vec3 default_control_spacing(const Grid& image_grid) {
  const Vec3 extent = image_grid.world_extent();
  Vec3 h;
  for (int a = 0; a < 3; ++a)
    h[a] = extent[a] > 0.0 ? extent[a] / 8.0 : image_grid.spacing[a];
  return h;
}

namespace {

constexpr int kMargin = 3;  // control points beyond the image on each side

Grid make_control_grid(const Grid& image_grid, const Vec3& spacing) {
  Grid cg;
  cg.dim = image_grid.dim;
  const Vec3 extent = image_grid.world_extent();
  for (int a = 0; a < 3; ++a) {
    if (a >= image_grid.dim) {
      cg.dims[a] = 1;
      cg.spacing[a] = 1.0;
      cg.origin[a] = image_grid.origin[a];
      continue;
    }
    if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a]))
      throw InvalidInput("control spacing must be positive");
    const auto intervals = std::max<std::int64_t>(
        1, static_cast<std::int64_t>(std::ceil(extent[a] / spacing[a] - 1e-12)));
    cg.dims[a] = intervals + 2 * kMargin + 1;
    cg.spacing[a] = spacing[a];
    cg.origin[a] = image_grid.origin[a] - kMargin * spacing[a];
  }
  cg.validate();
  return cg;
}

struct LatticeSupport {
  std::int64_t base[3];   // first of the 4 control indices per axis
  std::array<double, 4> weights[3];
};

// Tensor-product support of a point; false when full 4^dim support is
// unavailable. At the upper edge the knot interval is shifted down one,
// which evaluates identically by basis continuity.
bool lattice_support(const Grid& cg, const Vec3& p, LatticeSupport& out) {
  for (int a = 0; a < 3; ++a) {
    if (a >= cg.dim) {
      out.base[a] = 0;
      out.weights[a] = {1.0, 0.0, 0.0, 0.0};
      continue;
    }
    const double u = (p[a] - cg.origin[a]) / cg.spacing[a];
    if (!(u >= 1.0 - 1e-9) || u > static_cast<double>(cg.dims[a] - 2) + 1e-9)
      return false;
    auto i0 = static_cast<std::int64_t>(std::floor(u));
    if (i0 < 1) i0 = 1;
    if (i0 > cg.dims[a] - 3) i0 = cg.dims[a] - 3;
    double t = u - static_cast<double>(i0);
    if (t < 0.0) t = 0.0;
    if (t > 1.0) t = 1.0;
    out.base[a] = i0 - 1;
    out.weights[a] = cubic_bspline_weights(t);
  }
  return true;
}

int support_size(int dim) { return dim == 2 ? 16 : 64; }

// Flattened (linear control index, weight) pairs in fixed z-y-x order.
void expand_support(const Grid& cg, const LatticeSupport& s, std::int64_t* index,
                    double* weight) {
  const int nz = cg.dim == 2 ? 1 : 4;
  int c = 0;
  for (int kz = 0; kz < nz; ++kz) {
    for (int ky = 0; ky < 4; ++ky) {
      for (int kx = 0; kx < 4; ++kx) {
        const Index3 idx{s.base[0] + kx, s.base[1] + ky, s.base[2] + kz};
        index[c] = static_cast<std::int64_t>(cg.linear_index(idx));
        weight[c] = s.weights[0][static_cast<std::size_t>(kx)] *
                    s.weights[1][static_cast<std::size_t>(ky)] *
                    s.weights[2][static_cast<std::size_t>(kz)];
        ++c;
      }
    }
  }
}

}  // namespace

BsplineField fit_bspline(const SparseCorrespondence& corr, const Grid& image_grid,
                         const Vec3& control_spacing, double lambda,
                         FieldAnchor anchor) {
  corr.validate();
  image_grid.validate();
  if (image_grid.dim != corr.dim)
    throw InvalidInput("image grid dim does not match correspondence dim");
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw InvalidInput("lambda must be non-negative and finite");

  BsplineField field;
  field.control_grid = make_control_grid(image_grid, control_spacing);
  field.lambda = lambda;
  const auto m = static_cast<Eigen::Index>(field.control_grid.voxel_count());
  const int dim = corr.dim;

  Eigen::MatrixXd normal = Eigen::MatrixXd::Zero(m, m);
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(m, dim);

  const auto pts = anchor_points(corr, anchor);
  const int sup = support_size(dim);
  std::int64_t index[64];
  double weight[64];
  for (std::size_t i = 0; i < corr.size(); ++i) {
    LatticeSupport s;
    if (!lattice_support(field.control_grid, pts[i], s))
      throw InvalidInput("landmark outside control lattice support");
    expand_support(field.control_grid, s, index, weight);
    for (int a = 0; a < sup; ++a) {
      const auto ia = static_cast<Eigen::Index>(index[a]);
      for (int b = 0; b < sup; ++b)
        normal(ia, static_cast<Eigen::Index>(index[b])) += weight[a] * weight[b];
      for (int d = 0; d < dim; ++d)
        rhs(ia, d) += weight[a] * corr.displacements[i][d];
    }
  }
  normal.diagonal().array() += lambda;

  Eigen::LLT<Eigen::Ref<Eigen::MatrixXd>> llt(normal);  // in place
  if (llt.info() != Eigen::Success)
    throw NumericalFailure(
        "b-spline normal matrix is singular; use a positive lambda");
  const Eigen::MatrixXd coeff = llt.solve(rhs);

  field.coefficients.assign(static_cast<std::size_t>(m), Vec3::Zero());
  for (Eigen::Index r = 0; r < m; ++r)
    for (int d = 0; d < dim; ++d)
      field.coefficients[static_cast<std::size_t>(r)][d] = coeff(r, d);
  return field;
}

BsplineField fit_bspline(const SparseCorrespondence& corr, const Grid& image_grid,
                         double control_spacing, double lambda, FieldAnchor anchor) {
  return fit_bspline(corr, image_grid,
                     Vec3(control_spacing, control_spacing, control_spacing), lambda,
                     anchor);
}

Vec3 eval_bspline_at(const BsplineField& field, const Vec3& p) {
  LatticeSupport s;
  if (!lattice_support(field.control_grid, p, s))
    throw InvalidInput("grid exceeds lattice support");
  const int sup = support_size(field.control_grid.dim);
  std::int64_t index[64];
  double weight[64];
  expand_support(field.control_grid, s, index, weight);
  Vec3 value = Vec3::Zero();
  for (int c = 0; c < sup; ++c)
    value += weight[c] * field.coefficients[static_cast<std::size_t>(index[c])];
  return value;
}

DenseFieldResult eval_bspline(const BsplineField& field, const Grid& grid) {
  grid.validate();
  if (grid.dim != field.control_grid.dim)
    throw InvalidInput("grid dim does not match control lattice dim");

  DenseFieldResult result;
  result.grid = grid;
  const std::size_t n = grid.voxel_count();
  result.field.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    result.field[i] = eval_bspline_at(field, voxel_center(grid, i));
  return result;
}

}  // namespace gpwarp
