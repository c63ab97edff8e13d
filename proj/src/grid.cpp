#include "anthracnose/grid.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

#include "anthracnose/errors.hpp"

namespace anthracnose {

std::array<double, 2> SpatialGrid::center(int cell) const {
  const int i = cell % resolution[0];
  const int j = cell / resolution[0];
  return {(i + 0.5) * spacing[0], dimension == 2 ? (j + 0.5) * spacing[1] : 0.0};
}

Tensor isotropic(double value) { return Tensor::Identity() * value; }

Tensor diagonal(double dx, double dy) {
  Tensor t = Tensor::Zero();
  t(0, 0) = dx;
  t(1, 1) = dy;
  return t;
}

namespace {

double smallest_eigenvalue(const Tensor& t, int dimension) {
  if (dimension == 1) return t(0, 0);
  Eigen::SelfAdjointEigenSolver<Tensor> es(t, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

double harmonic_mean(double a, double b) { return (a + b) > 0.0 ? 2.0 * a * b / (a + b) : 0.0; }

}  // namespace

std::pair<SpatialGrid, DiffusionField> build_grid(const GridSpec& spec, const DiffusionSpec& A) {
  if (spec.dimension != 1 && spec.dimension != 2)
    throw DomainError("build_grid: dimension must be 1 or 2");
  for (int d = 0; d < spec.dimension; ++d) {
    if (spec.resolution[d] < 2) throw DomainError("build_grid: resolution must be >= 2 per axis");
    if (!(spec.extents[d] > 0.0)) throw DomainError("build_grid: extents must be positive");
  }

  SpatialGrid g;
  g.dimension = spec.dimension;
  g.extents = spec.extents;
  g.resolution = spec.resolution;
  if (g.dimension == 1) {
    g.resolution[1] = 1;
    g.extents[1] = 1.0;
  }
  g.spacing = {g.extents[0] / g.resolution[0], g.extents[1] / g.resolution[1]};
  g.cell_volume = g.dimension == 2 ? g.spacing[0] * g.spacing[1] : g.spacing[0];

  const int nx = g.resolution[0], ny = g.resolution[1];
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i + 1 < nx; ++i) {
      g.faces.push_back({g.index(i, j), g.index(i + 1, j), 0,
                         g.dimension == 2 ? g.spacing[1] : 1.0, g.spacing[0]});
    }
  }
  if (g.dimension == 2) {
    for (int j = 0; j + 1 < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        g.faces.push_back({g.index(i, j), g.index(i, j + 1), 1, g.spacing[0], g.spacing[1]});
      }
    }
  }

  DiffusionField field;
  const int n = g.cell_count();
  field.tensors.reserve(n);
  field.coercivity = std::numeric_limits<double>::infinity();
  for (int c = 0; c < n; ++c) {
    Tensor t = std::holds_alternative<Tensor>(A)
                   ? std::get<Tensor>(A)
                   : std::get<std::function<Tensor(const std::array<double, 2>&)>>(A)(g.center(c));
    if (g.dimension == 2 && std::abs(t(0, 1) - t(1, 0)) > 1e-12)
      throw DomainError("build_grid: diffusion tensor must be symmetric");
    const double lmin = smallest_eigenvalue(t, g.dimension);
    if (!(lmin > 0.0)) throw DomainError("build_grid: diffusion tensor must be positive definite");
    field.coercivity = std::min(field.coercivity, lmin);
    field.tensors.push_back(t);
  }

  field.face_diffusivity.reserve(g.faces.size());
  for (const auto& f : g.faces) {
    field.face_diffusivity.push_back(
        harmonic_mean(field.tensors[f.left](f.axis, f.axis), field.tensors[f.right](f.axis, f.axis)));
  }
  return {std::move(g), std::move(field)};
}

std::pair<SpatialGrid, DiffusionField> single_cell_grid(double volume) {
  SpatialGrid g;
  g.dimension = 1;
  g.extents = {volume, 1.0};
  g.resolution = {1, 1};
  g.spacing = {volume, 1.0};
  g.cell_volume = volume;
  DiffusionField field;
  field.tensors.push_back(Tensor::Identity());
  field.coercivity = 1.0;
  return {std::move(g), std::move(field)};
}

}  // namespace anthracnose
