#pragma once

#include <array>
#include <functional>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace anthracnose {

/// Field values, one per cell (theta, alpha, u, epsilon, k1, k2 all share it).
using ScalarField = Eigen::VectorXd;

struct GridSpec {
  int dimension = 1;                  ///< 1 or 2
  std::array<double, 2> extents{1.0, 1.0};
  std::array<int, 2> resolution{2, 1};
};

/// Interior face between two cells. Exterior faces are not stored: that is
/// the no-flux boundary.
struct Face {
  int left = 0;
  int right = 0;
  int axis = 0;
  double area = 0.0;
  double distance = 0.0;  ///< center-to-center
};

/// Uniform cell-centered grid on an interval or a rectangle.
struct SpatialGrid {
  int dimension = 1;
  std::array<double, 2> extents{1.0, 1.0};
  std::array<int, 2> resolution{1, 1};
  std::array<double, 2> spacing{1.0, 1.0};
  double cell_volume = 1.0;
  std::vector<Face> faces;

  int cell_count() const { return resolution[0] * (dimension == 2 ? resolution[1] : 1); }
  int index(int i, int j = 0) const { return i + resolution[0] * j; }
  std::array<double, 2> center(int cell) const;
  double domain_volume() const { return cell_volume * cell_count(); }
};

using Tensor = Eigen::Matrix2d;

/// Per-cell symmetric positive-definite diffusion tensor. Only the diagonal
/// entries enter the discretization (axis-aligned faces).
struct DiffusionField {
  std::vector<Tensor> tensors;
  double coercivity = 0.0;  ///< min over cells of the smallest eigenvalue
  std::vector<double> face_diffusivity;  ///< harmonic mean projected on each face normal
};

using DiffusionSpec = std::variant<Tensor, std::function<Tensor(const std::array<double, 2>&)>>;

/// Isotropic tensor value * I.
Tensor isotropic(double value);
/// diag(dx, dy).
Tensor diagonal(double dx, double dy);

/// Builds the grid and evaluates the diffusion tensor per cell. Throws
/// DomainError for invalid specs or tensors that are not symmetric positive
/// definite.
std::pair<SpatialGrid, DiffusionField> build_grid(const GridSpec& spec, const DiffusionSpec& A);

/// One-cell grid (no faces) used to reduce the spatial problems to scalar ones.
std::pair<SpatialGrid, DiffusionField> single_cell_grid(double volume = 1.0);

}  // namespace anthracnose
