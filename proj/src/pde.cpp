#include "anthracnose/pde.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>

#include "anthracnose/errors.hpp"

namespace anthracnose {

namespace {

using Triplet = Eigen::Triplet<double>;

double inf_norm(const SparseMatrix& m) {
  Eigen::VectorXd rows = Eigen::VectorXd::Zero(m.rows());
  for (int k = 0; k < m.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(m, k); it; ++it) rows(it.row()) += std::abs(it.value());
  return m.rows() ? rows.maxCoeff() : 0.0;
}

void require_size(const ScalarField& f, int n, const char* what) {
  if (f.size() != n) throw DomainError(std::string("field size mismatch: ") + what);
}

int step_count(double T, double dt) {
  if (!(dt > 0.0)) throw DomainError("time step must be positive");
  if (T < 0.0) throw DomainError("horizon must be nonnegative");
  if (T == 0.0) return 0;
  return std::max(1, static_cast<int>(std::ceil(T / dt - 1e-9)));
}

}  // namespace

SparseMatrix assemble_diffusion(const SpatialGrid& grid, const DiffusionField& A) {
  const int n = grid.cell_count();
  if (A.face_diffusivity.size() != grid.faces.size())
    throw DomainError("assemble_diffusion: diffusion field does not match the grid");
  std::vector<Triplet> trips;
  trips.reserve(4 * grid.faces.size());
  const double inv_v = 1.0 / grid.cell_volume;
  for (std::size_t f = 0; f < grid.faces.size(); ++f) {
    const Face& face = grid.faces[f];
    const double t = face.area * A.face_diffusivity[f] / face.distance * inv_v;
    trips.emplace_back(face.left, face.left, t);
    trips.emplace_back(face.right, face.right, t);
    trips.emplace_back(face.left, face.right, -t);
    trips.emplace_back(face.right, face.left, -t);
  }
  SparseMatrix m(n, n);
  m.setFromTriplets(trips.begin(), trips.end());
  return m;
}

OperatorMatrix assemble_operator(const SpatialGrid& grid, const DiffusionField& A,
                                 const ScalarField& alpha, const ScalarField& u, double theta1,
                                 Reaction reaction) {
  const int n = grid.cell_count();
  OperatorMatrix op;
  op.reaction = reaction;
  op.reaction_diagonal = ScalarField::Zero(n);
  if (reaction != Reaction::none) {
    require_size(alpha, n, "alpha");
    if (reaction == Reaction::full) {
      require_size(u, n, "u");
      for (int i = 0; i < n; ++i) {
        const double relief = 1.0 - theta1 * u(i);
        if (!(relief > 0.0)) throw DomainError("assemble_operator: 1 - theta1 u must be positive");
        op.reaction_diagonal(i) = alpha(i) / relief;
      }
    } else {
      op.reaction_diagonal = alpha;
    }
  }
  op.matrix = assemble_diffusion(grid, A);
  SparseMatrix diag(n, n);
  std::vector<Triplet> trips;
  trips.reserve(n);
  for (int i = 0; i < n; ++i) trips.emplace_back(i, i, op.reaction_diagonal(i));
  diag.setFromTriplets(trips.begin(), trips.end());
  op.matrix = op.matrix + diag;
  op.matrix.makeCompressed();
  return op;
}

double asymmetry(const SparseMatrix& m) {
  SparseMatrix d = SparseMatrix(m.transpose()) - m;
  double worst = 0.0;
  for (int k = 0; k < d.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(d, k); it; ++it) worst = std::max(worst, std::abs(it.value()));
  return worst;
}

ScalarField solve_spd(const SparseMatrix& A, const ScalarField& b) {
  if (A.rows() != b.size()) throw DomainError("solve_spd: size mismatch");
  Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper> cg;
  cg.setTolerance(1e-15);
  cg.setMaxIterations(4 * static_cast<int>(A.rows()) + 100);
  cg.compute(A);
  if (cg.info() != Eigen::Success) throw SolverError("solve_spd: factorization failed");

  const double a_norm = inf_norm(A);
  ScalarField x = cg.solve(b);
  for (int round = 0;; ++round) {
    if (!x.allFinite()) throw SolverError("solve_spd: non-finite iterate");
    const ScalarField r = b - A * x;
    const double scale =
        std::max({1.0, b.lpNorm<Eigen::Infinity>(), a_norm * x.lpNorm<Eigen::Infinity>()});
    if (r.lpNorm<Eigen::Infinity>() <= 1e-12 * scale) return x;
    if (round == 5) throw SolverError("solve_spd: residual above 1e-12 after refinement");
    x += cg.solve(r);
  }
}

ImplicitStepper::ImplicitStepper(const OperatorMatrix& L, double dt) : dt_(dt) {
  if (!(dt > 0.0)) throw DomainError("step_implicit: dt must be positive");
  SparseMatrix id(L.size(), L.size());
  id.setIdentity();
  system_ = id + dt * L.matrix;
  system_.makeCompressed();
}

ScalarField ImplicitStepper::step(const ScalarField& theta, const ScalarField& source) const {
  require_size(theta, static_cast<int>(system_.rows()), "theta");
  require_size(source, static_cast<int>(system_.rows()), "source");
  return solve_spd(system_, theta + dt_ * source);
}

ScalarField step_implicit(const ScalarField& theta, const OperatorMatrix& L,
                          const ScalarField& source, double dt) {
  return ImplicitStepper(L, dt).step(theta, source);
}

FieldPath integrate_pde(const ScalarField& theta0, const OperatorMatrix& L,
                        const ScalarField& source, double T, double dt, int record_every) {
  if ((theta0.array() < 0.0).any()) throw DomainError("integrate_pde: theta0 must be nonnegative");
  if (record_every < 1) throw DomainError("integrate_pde: record_every must be >= 1");
  const int n = step_count(T, dt);
  FieldPath path;
  path.times.push_back(0.0);
  path.states.push_back(theta0);
  if (n == 0) return path;
  const double h = T / n;
  const ImplicitStepper stepper(L, h);
  ScalarField theta = theta0;
  for (int s = 1; s <= n; ++s) {
    theta = stepper.step(theta, source);
    if (s % record_every == 0 || s == n) {
      path.times.push_back(s == n ? T : s * h);
      path.states.push_back(theta);
    }
  }
  return path;
}

ScalarField solve_equilibrium(const OperatorMatrix& L, const ScalarField& alpha) {
  if (L.reaction != Reaction::full)
    throw DomainError("solve_equilibrium: operator must include the full reaction term");
  require_size(alpha, L.size(), "alpha");
  if ((alpha.array() == 0.0).all())
    throw SolverError("solve_equilibrium: alpha vanishes, the Neumann operator is singular");
  return solve_spd(L.matrix, alpha);
}

BoundsReport bound_constants(const ScalarField& theta0, const ScalarField& u, double theta1) {
  if (theta0.size() == 0 || theta0.size() != u.size())
    throw DomainError("bound_constants: field size mismatch");
  BoundsReport r;
  const ScalarField relief = (1.0 - theta1 * u.array()).matrix();
  if ((relief.array() <= 0.0).any()) throw DomainError("bound_constants: 1 - theta1 u must be positive");
  r.m = theta0.minCoeff();
  r.M = std::max(theta0.maxCoeff(), relief.maxCoeff());
  r.rho = relief.cwiseInverse();
  return r;
}

BoundsReport verify_bounds(const FieldPath& path, const ScalarField& rho, const ScalarField& alpha,
                           double m, double M) {
  BoundsReport r;
  r.m = m;
  r.M = M;
  r.rho = rho;
  r.worst_lower_slack = std::numeric_limits<double>::infinity();
  r.worst_upper_slack = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < path.states.size(); ++s) {
    const double t = path.times[s];
    const ScalarField& theta = path.states[s];
    require_size(theta, static_cast<int>(rho.size()), "path state");
    for (int i = 0; i < theta.size(); ++i) {
      const double lower = std::exp(t * rho(i) * alpha(i)) * theta(i) - m;
      const double upper = M - theta(i);
      if (lower < r.worst_lower_slack) {
        r.worst_lower_slack = lower;
        r.worst_lower_time = t;
      }
      if (upper < r.worst_upper_slack) {
        r.worst_upper_slack = upper;
        r.worst_upper_time = t;
      }
    }
  }
  return r;
}

namespace {

EigenEstimate inverse_iteration(const SparseMatrix& L, const Eigen::SimplicialLDLT<SparseMatrix>& solver,
                                const std::vector<EigenEstimate>& found, double tol, int max_iter) {
  const int n = static_cast<int>(L.rows());
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) x(i) = 1.0 + 0.37 * std::sin(0.71 * i + 0.13) + 0.11 * std::cos(2.3 * i);
  auto deflate = [&](Eigen::VectorXd& v) {
    for (const auto& e : found) v -= e.vector.dot(v) * e.vector;
  };
  deflate(x);
  x.normalize();
  double lambda = x.dot(L * x);
  for (int it = 1; it <= max_iter; ++it) {
    Eigen::VectorXd y = solver.solve(x);
    deflate(y);
    const double norm = y.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) throw SolverError("principal_eigenvalue: iteration broke down");
    x = y / norm;
    const Eigen::VectorXd Lx = L * x;
    const double next = x.dot(Lx);
    const double scale = std::max(1.0, std::abs(next));
    const double resid = (Lx - next * x).norm();
    const bool settled = std::abs(next - lambda) <= tol * scale && resid <= std::sqrt(tol) * scale;
    lambda = next;
    if (it >= 2 && settled) {
      if (x.sum() < 0.0) x = -x;
      return {lambda, x, it};
    }
  }
  throw ConvergenceError("principal_eigenvalue: no convergence within max_iter", std::abs(lambda));
}

}  // namespace

std::vector<EigenEstimate> smallest_eigenvalues(const OperatorMatrix& L, int count, double tol,
                                                int max_iter) {
  const int n = L.size();
  if (count < 1 || count > n) throw DomainError("smallest_eigenvalues: count out of range");
  if (asymmetry(L.matrix) > 1e-12 * std::max(1.0, inf_norm(L.matrix)))
    throw DomainError("principal_eigenvalue: operator must be symmetric");

  // Gershgorin: all eigenvalues are >= min_i (a_ii - sum_j |a_ij|), so the shift makes L + s I SPD.
  double lower = std::numeric_limits<double>::infinity();
  for (int k = 0; k < n; ++k) {
    double diag = 0.0, off = 0.0;
    for (SparseMatrix::InnerIterator it(L.matrix, k); it; ++it)
      (it.row() == k ? diag : off) += it.row() == k ? it.value() : std::abs(it.value());
    lower = std::min(lower, diag - off);
  }
  const double shift = std::max(0.0, -lower) + 1e-6 * (1.0 + inf_norm(L.matrix));
  SparseMatrix id(n, n);
  id.setIdentity();
  const SparseMatrix shifted = L.matrix + shift * id;
  Eigen::SimplicialLDLT<SparseMatrix> solver(shifted);
  if (solver.info() != Eigen::Success) throw SolverError("principal_eigenvalue: factorization failed");

  std::vector<EigenEstimate> found;
  for (int c = 0; c < count; ++c) {
    found.push_back(inverse_iteration(L.matrix, solver, found, tol, max_iter));
    found.back().resolution = 1e-12 * (1.0 + inf_norm(L.matrix));
  }
  return found;
}

EigenEstimate principal_eigenvalue(const OperatorMatrix& L, double tol, int max_iter) {
  return smallest_eigenvalues(L, 1, tol, max_iter).front();
}

}  // namespace anthracnose
