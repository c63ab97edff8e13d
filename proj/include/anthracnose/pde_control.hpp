#pragma once

// Control of the spatial model under
//   J(u) = int_0^T int (theta^2 + k1 u^2) dx dt + int k2 theta(T)^2 dx.
// Two routes: LQR feedback from a matrix Riccati equation on the model
// linearized at (theta, u) = (eps, 0), and a forward-backward sweep on the
// nonlinear model driven by the adjoint state.

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "anthracnose/pde.hpp"

namespace anthracnose {

struct PdeCostSpec {
  ScalarField k1;  ///< control weight, > 0
  ScalarField k2;  ///< terminal weight, >= 0

  static PdeCostSpec uniform(int cells, double k1, double k2);
  void validate(int cells) const;
};

struct LinearizationPoint {
  ScalarField epsilon;  ///< state offset, > 0 (eps = 0 is not controllable)
};

/// Linearized dynamics d theta/dt = -K theta - b v, with v = u - 1/(eps theta1).
/// K is the negated linearized generator alpha - div(A grad); b = alpha eps theta1.
struct Linearization {
  OperatorMatrix K;
  ScalarField b;
};

Linearization linearize(const ScalarField& alpha, const LinearizationPoint& eps, double theta1,
                        const SpatialGrid& grid, const DiffusionField& A);

struct RiccatiState {
  double t = 0.0;
  Eigen::MatrixXd P;
};

/// Samples of P on a pseudo-time grid starting at 0.
struct RiccatiPath {
  std::vector<RiccatiState> samples;

  double horizon() const { return samples.empty() ? 0.0 : samples.back().t; }
  /// Linear interpolation, clamped to the sampled range.
  Eigen::MatrixXd at(double s) const;
};

/// RK4 on dP/ds = -K P - P K - P diag(b^2/k1) P + I from P(0) = diag(k2),
/// symmetrized each step. Rejects asymmetric K; throws SolverError once
/// |P| exceeds 1e12.
RiccatiPath integrate_riccati(const Linearization& lin, const PdeCostSpec& cost, double T, double dt,
                              int record_every = 1);

struct RiccatiSpectrum {
  double trace = 0.0;
  double min_eig = 0.0;
  double max_eig = 0.0;
  double asymmetry = 0.0;
};

RiccatiSpectrum riccati_spectrum(const Eigen::MatrixXd& P);

struct FeedbackControl {
  ScalarField u;    ///< clamped to [0, 1]
  ScalarField raw;  ///< before clamping
  double clamped_fraction = 0.0;
};

/// u = (b/k1) P(T - t) theta + 1/(eps theta1), cellwise, then clamped.
FeedbackControl riccati_feedback(const RiccatiPath& path, const ScalarField& theta, double t, double T,
                                 const Linearization& lin, const PdeCostSpec& cost,
                                 const LinearizationPoint& eps, double theta1);

/// Closed loop on the linearized system with the unclamped shifted control
/// v = (b/k1) P(T - t) theta. Cost is int (theta^2 + k1 v^2) dx dt + int k2 theta(T)^2 dx.
struct RegulatorRun {
  std::vector<double> times;
  std::vector<ScalarField> theta;
  std::vector<ScalarField> v;
  double cost = 0.0;
};

RegulatorRun simulate_regulator(const Linearization& lin, const RiccatiPath& path,
                                const PdeCostSpec& cost, const SpatialGrid& grid,
                                const ScalarField& theta0, double T, double dt);

/// Same linear system under a given shifted control v(t) (no feedback).
RegulatorRun simulate_linear_open_loop(const Linearization& lin, const PdeCostSpec& cost,
                                       const SpatialGrid& grid, const ScalarField& theta0,
                                       const std::function<ScalarField(double)>& v, double T,
                                       double dt);

using FieldFn = std::function<ScalarField(double)>;
using ControlPath = std::vector<ScalarField>;  ///< u_n at t_n = n dt, n = 0..N

struct PdeControlProblem {
  SpatialGrid grid;
  DiffusionField A;
  FieldFn alpha;
  double theta1 = 0.6;
  PdeCostSpec cost;
  double T = 1.0;
  double dt = 1e-2;
  ScalarField theta0;

  int steps() const;
  double step() const { return T / steps(); }
  double time(int n) const { return n == steps() ? T : n * step(); }
  void validate() const;
};

ControlPath constant_control(const PdeControlProblem& problem, double value);

/// theta_{n+1} = (I + h L(alpha_{n+1}, u_{n+1}))^{-1} (theta_n + h alpha_{n+1}).
FieldPath solve_state(const PdeControlProblem& problem, const ControlPath& u);

/// Adjoint of the discrete state recursion, consistent with the trapezoid
/// cost: p_N = M_N^{-1} (2 k2 + h) theta_N, p_n = M_n^{-1} (p_{n+1} + 2 h theta_n).
/// As h -> 0 this is the backward implicit scheme for dp/dt = L p - 2 theta,
/// p(T) = 2 k2 theta(T).
FieldPath solve_adjoint_pde(const PdeControlProblem& problem, const FieldPath& theta,
                            const ControlPath& u);

/// Trapezoid in time, midpoint in space.
double eval_cost_JT3(const FieldPath& theta, const ControlPath& u, const PdeCostSpec& cost,
                     const SpatialGrid& grid, double dt);

/// Exact derivative of the discrete cost with respect to every u_{n,i}.
ControlPath cost_gradient(const PdeControlProblem& problem, const FieldPath& theta,
                          const FieldPath& p, const ControlPath& u);

/// Cellwise minimizer of the Hamiltonian: 1 where 27 alpha theta1^2 theta p >= 8 k1,
/// otherwise the smallest nonnegative root of 2 k1 u (1 - theta1 u)^2 = alpha theta1 theta p
/// projected onto [0, min(1/(3 theta1), 1)]. Cells with alpha theta p <= 0 get 0.
ScalarField hamiltonian_pointwise_feedback(const ScalarField& alpha, const ScalarField& theta,
                                           const ScalarField& p, double theta1,
                                           const ScalarField& k1);

struct SweepOptions {
  double relax = 0.5;
  int max_iter = 200;
  double tol = 1e-6;
};

struct SweepResult {
  ControlPath u;
  FieldPath theta;
  FieldPath p;
  std::vector<double> cost_history;  ///< cost of each iterate, in order
  int iterations = 0;
  bool converged = false;
  double final_change = 0.0;  ///< max-norm control change of the last update
};

/// Fixed-point iteration state -> adjoint -> relaxed pointwise update, from u = 0
/// unless an initial control is given. Never throws on non-convergence.
SweepResult forward_backward_sweep(const PdeControlProblem& problem, const SweepOptions& options = {},
                                   const ControlPath* initial = nullptr);

struct ClosedLoopRun {
  FieldPath theta;
  ControlPath u;
  double cost = 0.0;
  double clamped_fraction = 0.0;  ///< over all cells and steps
};

/// Nonlinear model driven by the clamped Riccati feedback, evaluated at the
/// previous state each step.
ClosedLoopRun simulate_riccati_closed_loop(const PdeControlProblem& problem, const Linearization& lin,
                                           const RiccatiPath& path, const LinearizationPoint& eps);

}  // namespace anthracnose
