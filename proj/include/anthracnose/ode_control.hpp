#pragma once

// Optimal control of the within-host inhibition rate under the quadratic cost
//   J_T(u) = int_0^T (k u^2 + theta^2) dt + f(theta(T)),
// solved with the maximum-principle feedback and shooting on the adjoint.

#include <functional>
#include <span>
#include <vector>

#include "anthracnose/model.hpp"

namespace anthracnose {

struct CostSpec {
  double k = 1.0;  ///< cost ratio of control effort, > 0
  std::function<double(double)> terminal;        ///< f(theta(T))
  std::function<double(double)> terminal_prime;  ///< f'(theta(T))

  /// f(theta) = weight * theta.
  static CostSpec linear_terminal(double k, double weight = 1.0);
  /// f(theta) = weight * theta^2.
  static CostSpec quadratic_terminal(double k, double weight);
  /// f = 0.
  static CostSpec no_terminal(double k);

  /// k > 0 and f' consistent with central differences of f (tolerance 1e-6).
  void validate() const;
};

struct FeedbackCubic {
  bool bang = false;     ///< 27 c3 >= 8 k: no usable nonnegative root, u = 1
  double root = 0.0;     ///< smallest nonnegative root of c3 w^3 - 2k w + 2k
  double w3 = 1.0;       ///< root projected onto [1, min(3/2, 1/(1 - theta1))]
  bool clamped = false;  ///< projection moved the root
};

/// Residual c3 w^3 - 2k w + 2k.
double feedback_cubic_residual(double c3, double k, double w);

/// Smallest nonnegative root of c3 w^3 - 2k w + 2k = 0 by sign scan on
/// [0, 3/2] followed by bisection, then projected onto the admissible w range.
FeedbackCubic solve_feedback_cubic(double c3, double k, double theta1);

/// Pointwise optimal control: 1 when 27 alpha theta1^2 theta p >= 8k,
/// otherwise (w3 - 1) / (theta1 w3). Requires theta1 in (0,1), k > 0.
double optimal_u_feedback(double alpha_t, double theta, double p, double theta1, double k);

/// dp/dt = alpha p / (1 - theta1 u) - 2 theta.
double eval_adjoint_rhs(double t, double p, double theta, double u_val, double alpha_t,
                        double theta1);

struct CoupledPaths {
  std::vector<double> times;
  std::vector<double> theta;
  std::vector<double> p;
  std::vector<double> u;
  int regime_switches = 0;  ///< located bang/interior switches
};

/// Integrates theta and p forward from (theta0, p0) with u given by the
/// feedback law. RK4 steps are split at located bang/interior switches so the
/// result depends continuously on p0. Requires a time-only alpha.
CoupledPaths integrate_coupled(double p0, double theta0, const ModelParams& params,
                               const CostSpec& cost, double T, double dt);

struct ShootingOptions {
  double tol = 1e-10;
  int max_iter = 100;
  double guess0 = 0.0;
  double guess1 = 1.0;
};

struct OptimalSolution {
  ControlSignal control = ControlSignal::constant(0.0);
  std::vector<double> times;
  std::vector<double> theta;
  std::vector<double> adjoint;
  std::vector<double> u;
  double cost = 0.0;
  double p0 = 0.0;
  double residual = 0.0;  ///< p(T) - f'(theta(T))
  int iterations = 0;     ///< residual evaluations
};

/// Secant iteration on p0 with a bisection fallback once the terminal residual
/// p(T) - f'(theta(T)) changes sign. Throws ConvergenceError after max_iter.
OptimalSolution shoot_p0(double theta0, const ModelParams& params, const CostSpec& cost, double T,
                         double dt, const ShootingOptions& options = {});

/// Trapezoidal quadrature of k u^2 + theta^2 plus f(theta(T)).
double eval_cost_JT(std::span<const double> u, std::span<const double> theta,
                    const CostSpec& cost, double dt);

struct ControlledRun {
  std::vector<double> times;
  std::vector<double> theta;
  std::vector<double> u;
  double cost = 0.0;
};

/// Integrates the theta equation alone (RK4) under an open-loop control and
/// evaluates J_T.
ControlledRun evaluate_control(const ModelParams& params, const CostSpec& cost,
                               const ControlSignal& control, double theta0, double T, double dt);

struct ControlGradient {
  std::vector<double> times;
  std::vector<double> theta;
  std::vector<double> p;
  std::vector<double> dH_du;  ///< 2 k u - p alpha theta theta1 / (1 - theta1 u)^2
  double cost = 0.0;
};

/// Forward state, backward adjoint with p(T) = f'(theta(T)), and the
/// Hamiltonian gradient density for an arbitrary open-loop control. The
/// directional derivative of J_T along phi is int dH_du * phi dt.
ControlGradient hamiltonian_gradient(const ModelParams& params, const CostSpec& cost,
                                     const ControlSignal& control, double theta0, double T,
                                     double dt);

}  // namespace anthracnose
