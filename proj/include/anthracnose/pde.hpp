#pragma once

// Spatial inhibition model with no-flux boundary,
//   d theta/dt + L theta = alpha,   L theta = alpha theta / (1 - theta1 u) - div(A grad theta),
// discretized by cell-centered finite volumes and implicit Euler.

#include <vector>

#include <Eigen/Sparse>

#include "anthracnose/grid.hpp"

namespace anthracnose {

using SparseMatrix = Eigen::SparseMatrix<double>;

enum class Reaction {
  none,        ///< pure diffusion -div(A grad)
  full,        ///< alpha / (1 - theta1 u) - div(A grad)
  linearized,  ///< alpha - div(A grad), i.e. the negated linearized generator
};

/// Sparse discretization of the operator. Off-diagonals are <= 0, the
/// diffusion part has zero row sums, and it is symmetric on uniform grids.
struct OperatorMatrix {
  SparseMatrix matrix;
  Reaction reaction = Reaction::none;
  ScalarField reaction_diagonal;  ///< cellwise reaction coefficient added to the diagonal

  bool includes_reaction() const { return reaction != Reaction::none; }
  int size() const { return static_cast<int>(matrix.rows()); }
};

/// -div(A grad) alone.
SparseMatrix assemble_diffusion(const SpatialGrid& grid, const DiffusionField& A);

/// Assembles L so that the semi-discrete system reads d theta/dt + L theta = alpha.
/// Throws DomainError when 1 - theta1 u <= 0 in some cell or sizes mismatch.
OperatorMatrix assemble_operator(const SpatialGrid& grid, const DiffusionField& A,
                                 const ScalarField& alpha, const ScalarField& u, double theta1,
                                 Reaction reaction);

/// Max-norm of the symmetric defect of a sparse matrix.
double asymmetry(const SparseMatrix& m);

/// Solves (I + dt L) theta' = theta + dt source with conjugate gradients,
/// reusing the matrix across steps.
class ImplicitStepper {
 public:
  ImplicitStepper(const OperatorMatrix& L, double dt);
  ScalarField step(const ScalarField& theta, const ScalarField& source) const;
  double dt() const { return dt_; }
  const SparseMatrix& system() const { return system_; }

 private:
  double dt_;
  SparseMatrix system_;
};

ScalarField step_implicit(const ScalarField& theta, const OperatorMatrix& L,
                          const ScalarField& source, double dt);

struct FieldPath {
  std::vector<double> times;
  std::vector<ScalarField> states;
};

/// Repeated implicit steps on [0, T]; every record_every-th state (and the
/// last) is kept. T = 0 returns the initial field alone.
FieldPath integrate_pde(const ScalarField& theta0, const OperatorMatrix& L,
                        const ScalarField& source, double T, double dt, int record_every = 1);

/// Solves L theta* = alpha. Throws SolverError when alpha vanishes (Neumann
/// kernel) and DomainError when L lacks the full reaction term.
ScalarField solve_equilibrium(const OperatorMatrix& L, const ScalarField& alpha);

/// Solves an SPD sparse system by CG with iterative refinement; the residual
/// max-norm is driven below 1e-12 max(1, |b|_inf) or SolverError is thrown.
ScalarField solve_spd(const SparseMatrix& A, const ScalarField& b);

struct BoundsReport {
  double m = 0.0;  ///< inf theta0
  double M = 0.0;  ///< max(sup theta0, sup (1 - theta1 u))
  ScalarField rho; ///< 1 / (1 - theta1 u) per cell
  double worst_lower_slack = 0.0;  ///< min over path of e^{t rho alpha} theta - m
  double worst_upper_slack = 0.0;  ///< min over path of M - theta
  double worst_lower_time = 0.0;
  double worst_upper_time = 0.0;

  bool holds(double tolerance) const {
    return worst_lower_slack >= -tolerance && worst_upper_slack >= -tolerance;
  }
};

/// m, M and rho for an initial field and a control.
BoundsReport bound_constants(const ScalarField& theta0, const ScalarField& u, double theta1);

/// Worst slacks of m <= e^{t rho alpha} theta and theta <= M over the path.
BoundsReport verify_bounds(const FieldPath& path, const ScalarField& rho, const ScalarField& alpha,
                           double m, double M);

struct EigenEstimate {
  double value = 0.0;
  Eigen::VectorXd vector;
  int iterations = 0;
  double resolution = 0.0;  ///< roundoff level of value, 1e-12 (1 + |L|_inf)
  bool asymptotically_stable() const { return value > resolution; }
};

/// Smallest eigenvalue of a symmetric L by shifted inverse iteration.
/// Throws DomainError for asymmetric input, ConvergenceError after max_iter.
EigenEstimate principal_eigenvalue(const OperatorMatrix& L, double tol = 1e-8,
                                   int max_iter = 10000);

/// The count smallest eigenvalues, found one at a time with deflation.
std::vector<EigenEstimate> smallest_eigenvalues(const OperatorMatrix& L, int count,
                                                double tol = 1e-8, int max_iter = 10000);

}  // namespace anthracnose
