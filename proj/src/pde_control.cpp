#include "anthracnose/pde_control.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "anthracnose/errors.hpp"

namespace anthracnose {

PdeCostSpec PdeCostSpec::uniform(int cells, double k1, double k2) {
  return {ScalarField::Constant(cells, k1), ScalarField::Constant(cells, k2)};
}

void PdeCostSpec::validate(int cells) const {
  if (k1.size() != cells || k2.size() != cells) throw DomainError("cost weights must match the grid");
  if (!(k1.minCoeff() > 0.0)) throw DomainError("k1 must be positive");
  if (!(k2.minCoeff() >= 0.0)) throw DomainError("k2 must be nonnegative");
  if (!k1.allFinite() || !k2.allFinite()) throw DomainError("cost weights must be finite");
}

Linearization linearize(const ScalarField& alpha, const LinearizationPoint& eps, double theta1,
                        const SpatialGrid& grid, const DiffusionField& A) {
  const int n = grid.cell_count();
  if (eps.epsilon.size() != n) throw DomainError("linearize: epsilon must match the grid");
  if (!(eps.epsilon.minCoeff() > 0.0)) throw DomainError("linearize: epsilon must be positive");
  Linearization lin;
  lin.K = assemble_operator(grid, A, alpha, ScalarField::Zero(n), theta1, Reaction::linearized);
  lin.b = (alpha.array() * eps.epsilon.array() * theta1).matrix();
  return lin;
}

Eigen::MatrixXd RiccatiPath::at(double s) const {
  if (samples.empty()) throw DomainError("RiccatiPath: empty path");
  if (s <= samples.front().t) return samples.front().P;
  if (s >= samples.back().t) return samples.back().P;
  auto hi = std::upper_bound(samples.begin(), samples.end(), s,
                             [](double v, const RiccatiState& st) { return v < st.t; });
  auto lo = hi - 1;
  const double w = (s - lo->t) / (hi->t - lo->t);
  return (1.0 - w) * lo->P + w * hi->P;
}

RiccatiPath integrate_riccati(const Linearization& lin, const PdeCostSpec& cost, double T, double dt,
                              int record_every) {
  const int n = lin.K.size();
  cost.validate(n);
  if (!(dt > 0.0) || T < 0.0) throw DomainError("integrate_riccati: need dt > 0 and T >= 0");
  if (record_every < 1) throw DomainError("integrate_riccati: record_every must be >= 1");
  const Eigen::MatrixXd K = Eigen::MatrixXd(lin.K.matrix);
  if ((K - K.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, K.cwiseAbs().maxCoeff()))
    throw DomainError("integrate_riccati: linearized operator must be symmetric");
  const Eigen::VectorXd g = (lin.b.array().square() / cost.k1.array()).matrix();
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);

  auto rhs = [&](const Eigen::MatrixXd& P) -> Eigen::MatrixXd {
    Eigen::MatrixXd KP = K * P;
    return -KP - KP.transpose() - P * g.asDiagonal() * P + I;
  };

  const int steps = T == 0.0 ? 0 : std::max(1, static_cast<int>(std::ceil(T / dt - 1e-9)));
  const double h = steps ? T / steps : 0.0;
  RiccatiPath path;
  Eigen::MatrixXd P = cost.k2.asDiagonal();
  path.samples.push_back({0.0, P});
  for (int s = 1; s <= steps; ++s) {
    const Eigen::MatrixXd k1 = rhs(P);
    const Eigen::MatrixXd k2 = rhs(P + 0.5 * h * k1);
    const Eigen::MatrixXd k3 = rhs(P + 0.5 * h * k2);
    const Eigen::MatrixXd k4 = rhs(P + h * k3);
    P += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    P = 0.5 * (P + P.transpose()).eval();
    if (!P.allFinite() || P.norm() > 1e12) throw SolverError("integrate_riccati: solution blew up");
    if (s % record_every == 0 || s == steps) path.samples.push_back({s == steps ? T : s * h, P});
  }
  return path;
}

RiccatiSpectrum riccati_spectrum(const Eigen::MatrixXd& P) {
  RiccatiSpectrum r;
  r.trace = P.trace();
  r.asymmetry = (P - P.transpose()).cwiseAbs().maxCoeff();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(P, Eigen::EigenvaluesOnly);
  r.min_eig = es.eigenvalues().minCoeff();
  r.max_eig = es.eigenvalues().maxCoeff();
  return r;
}

FeedbackControl riccati_feedback(const RiccatiPath& path, const ScalarField& theta, double t, double T,
                                 const Linearization& lin, const PdeCostSpec& cost,
                                 const LinearizationPoint& eps, double theta1) {
  if (t < -1e-12 || t > T + 1e-12) throw DomainError("riccati_feedback: t outside [0, T]");
  const ScalarField Ptheta = path.at(T - t) * theta;
  FeedbackControl fc;
  fc.raw = (lin.b.array() / cost.k1.array() * Ptheta.array() +
            1.0 / (eps.epsilon.array() * theta1))
               .matrix();
  fc.u = fc.raw.cwiseMax(0.0).cwiseMin(1.0);
  int clamped = 0;
  for (int i = 0; i < fc.raw.size(); ++i)
    if (fc.raw(i) != fc.u(i)) ++clamped;
  fc.clamped_fraction = fc.raw.size() ? static_cast<double>(clamped) / fc.raw.size() : 0.0;
  return fc;
}

namespace {

double regulator_density(const ScalarField& theta, const ScalarField& v, const PdeCostSpec& cost,
                         double volume) {
  return volume * (theta.squaredNorm() + (cost.k1.array() * v.array().square()).sum());
}

RegulatorRun run_linear(const Linearization& lin, const PdeCostSpec& cost, const SpatialGrid& grid,
                        const ScalarField& theta0,
                        const std::function<ScalarField(double, const ScalarField&)>& v, double T,
                        double dt) {
  const int n = lin.K.size();
  cost.validate(n);
  if (theta0.size() != n) throw DomainError("regulator: theta0 must match the grid");
  if (!(dt > 0.0) || !(T > 0.0)) throw DomainError("regulator: need dt > 0 and T > 0");
  const int steps = std::max(1, static_cast<int>(std::ceil(T / dt - 1e-9)));
  const double h = T / steps;
  auto f = [&](double t, const ScalarField& th) -> ScalarField {
    return -(lin.K.matrix * th) - (lin.b.array() * v(t, th).array()).matrix();
  };
  RegulatorRun run;
  ScalarField th = theta0;
  const double V = grid.cell_volume;
  for (int s = 0; s <= steps; ++s) {
    const double t = s == steps ? T : s * h;
    run.times.push_back(t);
    run.theta.push_back(th);
    run.v.push_back(v(t, th));
    const double w = (s == 0 || s == steps) ? 0.5 * h : h;
    run.cost += w * regulator_density(th, run.v.back(), cost, V);
    if (s == steps) break;
    const ScalarField a = f(t, th);
    const ScalarField b = f(t + 0.5 * h, th + 0.5 * h * a);
    const ScalarField c = f(t + 0.5 * h, th + 0.5 * h * b);
    const ScalarField d = f(t + h, th + h * c);
    th += h / 6.0 * (a + 2.0 * b + 2.0 * c + d);
    if (!th.allFinite()) throw SolverError("regulator: state became non-finite");
  }
  run.cost += V * (cost.k2.array() * th.array().square()).sum();
  return run;
}

}  // namespace

RegulatorRun simulate_regulator(const Linearization& lin, const RiccatiPath& path,
                                const PdeCostSpec& cost, const SpatialGrid& grid,
                                const ScalarField& theta0, double T, double dt) {
  const ScalarField gain = (lin.b.array() / cost.k1.array()).matrix();
  return run_linear(
      lin, cost, grid, theta0,
      [&](double t, const ScalarField& th) -> ScalarField {
        return (gain.array() * (path.at(T - t) * th).array()).matrix();
      },
      T, dt);
}

RegulatorRun simulate_linear_open_loop(const Linearization& lin, const PdeCostSpec& cost,
                                       const SpatialGrid& grid, const ScalarField& theta0,
                                       const std::function<ScalarField(double)>& v, double T,
                                       double dt) {
  return run_linear(
      lin, cost, grid, theta0, [&](double t, const ScalarField&) { return v(t); }, T, dt);
}

int PdeControlProblem::steps() const {
  if (!(dt > 0.0) || !(T > 0.0)) throw DomainError("control problem: need dt > 0 and T > 0");
  return std::max(1, static_cast<int>(std::ceil(T / dt - 1e-9)));
}

void PdeControlProblem::validate() const {
  const int n = grid.cell_count();
  if (!alpha) throw DomainError("control problem: alpha is not set");
  if (!(theta1 > 0.0 && theta1 < 1.0)) throw DomainError("control problem: theta1 must lie in (0,1)");
  cost.validate(n);
  if (theta0.size() != n) throw DomainError("control problem: theta0 must match the grid");
  if ((theta0.array() < 0.0).any()) throw DomainError("control problem: theta0 must be nonnegative");
  steps();
}

ControlPath constant_control(const PdeControlProblem& problem, double value) {
  return ControlPath(problem.steps() + 1, ScalarField::Constant(problem.grid.cell_count(), value));
}

namespace {

void check_control(const PdeControlProblem& problem, const ControlPath& u) {
  if (static_cast<int>(u.size()) != problem.steps() + 1)
    throw DomainError("control path must have one field per time node");
  for (const auto& f : u)
    if (f.size() != problem.grid.cell_count()) throw DomainError("control field must match the grid");
}

ImplicitStepper stepper_at(const PdeControlProblem& problem, const ScalarField& alpha,
                           const ScalarField& u) {
  return ImplicitStepper(
      assemble_operator(problem.grid, problem.A, alpha, u, problem.theta1, Reaction::full),
      problem.step());
}

}  // namespace

FieldPath solve_state(const PdeControlProblem& problem, const ControlPath& u) {
  check_control(problem, u);
  const int N = problem.steps();
  FieldPath path;
  path.times.push_back(0.0);
  path.states.push_back(problem.theta0);
  ScalarField theta = problem.theta0;
  for (int n = 1; n <= N; ++n) {
    const double t = problem.time(n);
    const ScalarField a = problem.alpha(t);
    theta = stepper_at(problem, a, u[n]).step(theta, a);
    path.times.push_back(t);
    path.states.push_back(theta);
  }
  return path;
}

FieldPath solve_adjoint_pde(const PdeControlProblem& problem, const FieldPath& theta,
                            const ControlPath& u) {
  check_control(problem, u);
  const int N = problem.steps();
  if (static_cast<int>(theta.states.size()) != N + 1)
    throw DomainError("solve_adjoint_pde: state path is not aligned with the control");
  const double h = problem.step();
  FieldPath p;
  p.times = theta.times;
  p.states.assign(N + 1, ScalarField());
  auto solve_with = [&](int n, const ScalarField& rhs) {
    const ScalarField a = problem.alpha(problem.time(n));
    const OperatorMatrix L =
        assemble_operator(problem.grid, problem.A, a, u[n], problem.theta1, Reaction::full);
    return ImplicitStepper(L, h).step(rhs, ScalarField::Zero(rhs.size()));
  };
  p.states[N] = solve_with(N, ((2.0 * problem.cost.k2.array() + h) * theta.states[N].array()).matrix());
  for (int n = N - 1; n >= 0; --n)
    p.states[n] = solve_with(n, p.states[n + 1] + 2.0 * h * theta.states[n]);
  return p;
}

double eval_cost_JT3(const FieldPath& theta, const ControlPath& u, const PdeCostSpec& cost,
                     const SpatialGrid& grid, double dt) {
  const int n = grid.cell_count();
  if (theta.states.size() != u.size() || theta.states.empty())
    throw DomainError("eval_cost_JT3: paths are not aligned");
  cost.validate(n);
  const std::size_t N = u.size() - 1;
  double J = 0.0;
  for (std::size_t s = 0; s <= N; ++s) {
    if (theta.states[s].size() != n || u[s].size() != n)
      throw DomainError("eval_cost_JT3: field does not match the grid");
    const double w = N == 0 ? 0.0 : ((s == 0 || s == N) ? 0.5 * dt : dt);
    J += w * grid.cell_volume *
         (theta.states[s].squaredNorm() + (cost.k1.array() * u[s].array().square()).sum());
  }
  J += grid.cell_volume * (cost.k2.array() * theta.states[N].array().square()).sum();
  return J;
}

ControlPath cost_gradient(const PdeControlProblem& problem, const FieldPath& theta,
                          const FieldPath& p, const ControlPath& u) {
  check_control(problem, u);
  const int N = problem.steps();
  const double h = problem.step();
  const double V = problem.grid.cell_volume;
  const auto& k1 = problem.cost.k1.array();
  ControlPath g(N + 1);
  for (int n = 0; n <= N; ++n) {
    const double w = (n == 0 || n == N) ? 0.5 * h : h;
    g[n] = (V * 2.0 * w * k1 * u[n].array()).matrix();
    if (n == 0) continue;
    const ScalarField a = problem.alpha(problem.time(n));
    const auto rho = (1.0 - problem.theta1 * u[n].array()).inverse();
    g[n].array() -= V * h * a.array() * problem.theta1 * rho.square() * theta.states[n].array() *
                    p.states[n].array();
  }
  return g;
}

ScalarField hamiltonian_pointwise_feedback(const ScalarField& alpha, const ScalarField& theta,
                                           const ScalarField& p, double theta1,
                                           const ScalarField& k1) {
  if (!(theta1 > 0.0 && theta1 < 1.0)) throw DomainError("pointwise feedback: theta1 must lie in (0,1)");
  const int n = static_cast<int>(alpha.size());
  if (theta.size() != n || p.size() != n || k1.size() != n)
    throw DomainError("pointwise feedback: field size mismatch");
  const double apex = 1.0 / (3.0 * theta1);
  const double upper = std::min(apex, 1.0);
  ScalarField u(n);
  for (int i = 0; i < n; ++i) {
    const double c = alpha(i) * theta1 * theta(i) * p(i);
    if (27.0 * theta1 * c >= 8.0 * k1(i)) {
      u(i) = 1.0;
      continue;
    }
    if (!(c > 0.0)) {
      u(i) = 0.0;
      continue;
    }
    // g(u) = 2 k1 u (1 - theta1 u)^2 - c rises on [0, apex] from -c to a positive value.
    auto g = [&](double x) { return 2.0 * k1(i) * x * (1.0 - theta1 * x) * (1.0 - theta1 * x) - c; };
    double lo = 0.0, hi = apex;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      (g(mid) < 0.0 ? lo : hi) = mid;
    }
    const double root = std::abs(g(lo)) <= std::abs(g(hi)) ? lo : hi;
    u(i) = std::clamp(root, 0.0, upper);
  }
  return u;
}

SweepResult forward_backward_sweep(const PdeControlProblem& problem, const SweepOptions& options,
                                   const ControlPath* initial) {
  problem.validate();
  if (!(options.relax > 0.0 && options.relax <= 1.0)) throw DomainError("sweep: relax must lie in (0,1]");
  if (options.max_iter < 1) throw DomainError("sweep: max_iter must be >= 1");
  const int N = problem.steps();
  const double h = problem.step();

  SweepResult r;
  r.u = initial ? *initial : constant_control(problem, 0.0);
  check_control(problem, r.u);
  std::vector<ScalarField> alphas;
  alphas.reserve(N + 1);
  for (int n = 0; n <= N; ++n) alphas.push_back(problem.alpha(problem.time(n)));

  for (int it = 1; it <= options.max_iter; ++it) {
    r.theta = solve_state(problem, r.u);
    r.cost_history.push_back(eval_cost_JT3(r.theta, r.u, problem.cost, problem.grid, h));
    r.p = solve_adjoint_pde(problem, r.theta, r.u);
    double change = 0.0;
    for (int n = 0; n <= N; ++n) {
      const ScalarField target = hamiltonian_pointwise_feedback(
          alphas[n], r.theta.states[n], r.p.states[n], problem.theta1, problem.cost.k1);
      const ScalarField next = (1.0 - options.relax) * r.u[n] + options.relax * target;
      change = std::max(change, (next - r.u[n]).lpNorm<Eigen::Infinity>());
      r.u[n] = next;
    }
    r.iterations = it;
    r.final_change = change;
    if (change < options.tol) {
      r.converged = true;
      break;
    }
  }
  r.theta = solve_state(problem, r.u);
  r.p = solve_adjoint_pde(problem, r.theta, r.u);
  r.cost_history.push_back(eval_cost_JT3(r.theta, r.u, problem.cost, problem.grid, h));
  return r;
}

ClosedLoopRun simulate_riccati_closed_loop(const PdeControlProblem& problem, const Linearization& lin,
                                           const RiccatiPath& path, const LinearizationPoint& eps) {
  problem.validate();
  const int N = problem.steps();
  ClosedLoopRun run;
  run.theta.times.push_back(0.0);
  run.theta.states.push_back(problem.theta0);
  ScalarField theta = problem.theta0;
  double clamped = 0.0;
  for (int n = 0; n <= N; ++n) {
    const double t = problem.time(n);
    const FeedbackControl fc =
        riccati_feedback(path, theta, t, problem.T, lin, problem.cost, eps, problem.theta1);
    clamped += fc.clamped_fraction;
    run.u.push_back(fc.u);
    if (n == N) break;
    const double tn = problem.time(n + 1);
    const ScalarField a = problem.alpha(tn);
    theta = stepper_at(problem, a, fc.u).step(theta, a);
    run.theta.times.push_back(tn);
    run.theta.states.push_back(theta);
  }
  // u_{n+1} is applied on (t_n, t_{n+1}]; shift so the stored path matches the state recursion.
  ControlPath applied(N + 1);
  applied[0] = run.u[0];
  for (int n = 1; n <= N; ++n) applied[n] = run.u[n - 1];
  run.u = std::move(applied);
  run.clamped_fraction = clamped / (N + 1);
  run.cost = eval_cost_JT3(run.theta, run.u, problem.cost, problem.grid, problem.step());
  return run;
}

}  // namespace anthracnose
