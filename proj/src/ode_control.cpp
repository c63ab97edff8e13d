#include "anthracnose/ode_control.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

#include "anthracnose/errors.hpp"

namespace anthracnose {

CostSpec CostSpec::linear_terminal(double k, double weight) {
  return {k, [weight](double th) { return weight * th; }, [weight](double) { return weight; }};
}

CostSpec CostSpec::quadratic_terminal(double k, double weight) {
  return {k, [weight](double th) { return weight * th * th; },
          [weight](double th) { return 2.0 * weight * th; }};
}

CostSpec CostSpec::no_terminal(double k) {
  return {k, [](double) { return 0.0; }, [](double) { return 0.0; }};
}

void CostSpec::validate() const {
  if (!(k > 0.0)) throw DomainError("cost: k must be > 0");
  if (!terminal || !terminal_prime) throw DomainError("cost: terminal cost is not set");
  constexpr double h = 1e-5;
  for (double th : {0.0, 0.1, 0.25, 0.5, 0.75, 0.9}) {
    const double fd = (terminal(th + h) - terminal(th - h)) / (2.0 * h);
    if (std::abs(fd - terminal_prime(th)) > 1e-6 * std::max(1.0, std::abs(fd)))
      throw DomainError("cost: terminal_prime is inconsistent with terminal");
  }
}

double feedback_cubic_residual(double c3, double k, double w) {
  return c3 * w * w * w - 2.0 * k * w + 2.0 * k;
}

FeedbackCubic solve_feedback_cubic(double c3, double k, double theta1) {
  if (!(k > 0.0)) throw DomainError("solve_feedback_cubic: k must be > 0");
  if (!(theta1 >= 0.0 && theta1 < 1.0))
    throw DomainError("solve_feedback_cubic: theta1 must lie in [0,1)");

  FeedbackCubic out;
  const double w_hi = std::min(1.5, 1.0 / (1.0 - theta1));
  if (27.0 * c3 >= 8.0 * k) {
    out.bang = true;
    out.root = std::numeric_limits<double>::quiet_NaN();
    out.w3 = 1.0 / (1.0 - theta1);
    return out;
  }

  auto g = [&](double w) { return feedback_cubic_residual(c3, k, w); };

  // g(0) = 2k > 0. The first sign change on [0, 3/2] brackets the smallest
  // nonnegative root; below the threshold g(3/2) <= 0 up to roundoff.
  constexpr int kScan = 96;
  double lo = 0.0, hi = 1.5;
  bool bracketed = false;
  for (int i = 1; i <= kScan; ++i) {
    const double w = 1.5 * i / kScan;
    if (g(w) <= 0.0) {
      hi = w;
      bracketed = true;
      break;
    }
    lo = w;
  }

  double root = 1.5;
  if (bracketed) {
    if (g(hi) == 0.0) {
      root = hi;
    } else {
      for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (g(mid) > 0.0)
          lo = mid;
        else
          hi = mid;
      }
      root = std::abs(g(lo)) < std::abs(g(hi)) ? lo : hi;
    }
  }

  out.root = root;
  out.w3 = std::clamp(root, 1.0, w_hi);
  out.clamped = out.w3 != root;
  return out;
}

double optimal_u_feedback(double alpha_t, double theta, double p, double theta1, double k) {
  if (!(theta1 > 0.0 && theta1 < 1.0))
    throw DomainError("optimal_u_feedback: theta1 must lie in (0,1)");
  const double c3 = alpha_t * theta1 * theta1 * theta * p;
  const auto cubic = solve_feedback_cubic(c3, k, theta1);
  if (cubic.bang) return 1.0;
  return std::clamp((cubic.w3 - 1.0) / (theta1 * cubic.w3), 0.0, 1.0);
}

double eval_adjoint_rhs(double /*t*/, double p, double theta, double u_val, double alpha_t,
                        double theta1) {
  const double relief = 1.0 - theta1 * u_val;
  if (!(relief > 0.0)) throw DomainError("eval_adjoint_rhs: 1 - theta1*u must be positive");
  return alpha_t * p / relief - 2.0 * theta;
}

namespace {

void require_time_only_alpha(const ModelParams& params) {
  if (params.alpha.depends_on_state())
    throw DomainError("optimal control requires alpha to depend on time only");
}

std::size_t step_count(double T, double dt) {
  if (!(T > 0.0)) throw DomainError("horizon T must be positive");
  if (!(dt > 0.0)) throw DomainError("dt must be positive");
  if (dt > T * (1.0 + 1e-12)) throw DomainError("dt exceeds the horizon");
  return static_cast<std::size_t>(std::ceil(T / dt - 1e-9));
}

// Coupled (theta, p) system with the feedback regime frozen for the duration
// of a (sub)step. Inside the interior regime a stage that overshoots the bang
// threshold uses the limiting root w = 3/2, the continuous extension.
struct CoupledSystem {
  const ModelParams& params;
  double k;

  using Vec = std::array<double, 2>;

  bool bang_at(double t, const Vec& y) const {
    const double th1 = params.theta1;
    return 27.0 * params.alpha.at(t) * th1 * th1 * y[0] * y[1] >= 8.0 * k;
  }

  double control(double t, const Vec& y, bool bang) const {
    if (bang) return 1.0;
    const double th1 = params.theta1;
    const double c3 = params.alpha.at(t) * th1 * th1 * y[0] * y[1];
    const auto cubic = solve_feedback_cubic(c3, k, th1);
    const double w3 = cubic.bang ? std::min(1.5, 1.0 / (1.0 - th1)) : cubic.w3;
    return std::clamp((w3 - 1.0) / (th1 * w3), 0.0, 1.0);
  }

  Vec rhs(double t, const Vec& y, bool bang) const {
    const double a = params.alpha.at(t);
    const double u = control(t, y, bang);
    const double relief = 1.0 - params.theta1 * u;
    return {a * (1.0 - y[0] / relief), a * y[1] / relief - 2.0 * y[0]};
  }

  Vec rk4(double t, const Vec& y, double h, bool bang) const {
    auto shift = [](const Vec& a, double s, const Vec& d) {
      return Vec{a[0] + s * d[0], a[1] + s * d[1]};
    };
    const Vec k1 = rhs(t, y, bang);
    const Vec k2 = rhs(t + 0.5 * h, shift(y, 0.5 * h, k1), bang);
    const Vec k3 = rhs(t + 0.5 * h, shift(y, 0.5 * h, k2), bang);
    const Vec k4 = rhs(t + h, shift(y, h, k3), bang);
    return {y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])};
  }

  // One grid step of length h, split at regime switches (at most kMaxSplits
  // per step; beyond that the remainder is taken in the current regime).
  Vec step(double t, Vec y, double h, int& switches) const {
    constexpr int kMaxSplits = 4;
    double remaining = h;
    for (int splits = 0;; ++splits) {
      const bool bang = bang_at(t, y);
      const Vec trial = rk4(t, y, remaining, bang);
      if (bang_at(t + remaining, trial) == bang || splits >= kMaxSplits) return trial;

      double lo = 0.0, hi = remaining;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (bang_at(t + mid, rk4(t, y, mid, bang)) == bang)
          lo = mid;
        else
          hi = mid;
      }
      y = rk4(t, y, hi, bang);
      t += hi;
      remaining -= hi;
      ++switches;
      if (remaining <= 0.0) return y;
    }
  }
};

}  // namespace

CoupledPaths integrate_coupled(double p0, double theta0, const ModelParams& params,
                               const CostSpec& cost, double T, double dt) {
  require_time_only_alpha(params);
  if (!(params.theta1 > 0.0 && params.theta1 < 1.0))
    throw DomainError("integrate_coupled: theta1 must lie in (0,1)");
  if (!(cost.k > 0.0)) throw DomainError("integrate_coupled: k must be > 0");

  const std::size_t n = step_count(T, dt);
  const double h = T / static_cast<double>(n);
  const CoupledSystem sys{params, cost.k};

  CoupledPaths out;
  out.times.reserve(n + 1);
  out.theta.reserve(n + 1);
  out.p.reserve(n + 1);
  out.u.reserve(n + 1);

  CoupledSystem::Vec y{theta0, p0};
  for (std::size_t i = 0;; ++i) {
    const double t = h * static_cast<double>(i);
    out.times.push_back(t);
    out.theta.push_back(y[0]);
    out.p.push_back(y[1]);
    out.u.push_back(optimal_u_feedback(params.alpha.at(t), y[0], y[1], params.theta1, cost.k));
    if (i == n) break;
    y = sys.step(t, y, h, out.regime_switches);
    if (!std::isfinite(y[0]) || !std::isfinite(y[1])) {
      std::ostringstream os;
      os << "integrate_coupled: non-finite state at t=" << t + h;
      throw DomainError(os.str());
    }
  }
  return out;
}

double eval_cost_JT(std::span<const double> u, std::span<const double> theta, const CostSpec& cost,
                    double dt) {
  if (u.size() != theta.size() || u.empty())
    throw DomainError("eval_cost_JT: control and state paths are not on the same grid");
  double integral = 0.0;
  const std::size_t n = u.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double w = (i == 0 || i + 1 == n) ? 0.5 : 1.0;
    integral += w * (cost.k * u[i] * u[i] + theta[i] * theta[i]);
  }
  if (n == 1) integral = 0.0;
  return integral * dt + cost.terminal(theta.back());
}

OptimalSolution shoot_p0(double theta0, const ModelParams& params, const CostSpec& cost, double T,
                         double dt, const ShootingOptions& options) {
  require_time_only_alpha(params);

  int evaluations = 0;
  CoupledPaths best_paths;
  double best_residual = std::numeric_limits<double>::infinity();
  double best_p0 = options.guess0;

  auto residual = [&](double p0) {
    ++evaluations;
    CoupledPaths paths = integrate_coupled(p0, theta0, params, cost, T, dt);
    const double r = paths.p.back() - cost.terminal_prime(paths.theta.back());
    if (std::abs(r) < std::abs(best_residual)) {
      best_residual = r;
      best_p0 = p0;
      best_paths = std::move(paths);
    }
    return r;
  };

  auto finish = [&]() {
    OptimalSolution sol;
    const double h = T / static_cast<double>(best_paths.times.size() - 1);
    sol.control = ControlSignal(best_paths.times, best_paths.u);
    sol.times = std::move(best_paths.times);
    sol.theta = std::move(best_paths.theta);
    sol.adjoint = std::move(best_paths.p);
    sol.u = std::move(best_paths.u);
    sol.cost = eval_cost_JT(sol.u, sol.theta, cost, h);
    sol.p0 = best_p0;
    sol.residual = best_residual;
    sol.iterations = evaluations;
    return sol;
  };

  double x0 = options.guess0;
  double r0 = residual(x0);
  if (std::abs(r0) < options.tol) return finish();
  double x1 = options.guess1;
  double r1 = residual(x1);

  bool bracketed = false;
  double lo = 0.0, hi = 0.0, r_lo = 0.0;
  auto update_bracket = [&](double xa, double ra, double xb, double rb) {
    if ((ra < 0.0) != (rb < 0.0)) {
      bracketed = true;
      lo = std::min(xa, xb);
      hi = std::max(xa, xb);
      r_lo = (lo == xa) ? ra : rb;
    }
  };
  update_bracket(x0, r0, x1, r1);
  double width_before = bracketed ? hi - lo : 0.0;
  int since_halving = 0;

  while (std::abs(r1) >= options.tol) {
    if (evaluations >= options.max_iter) {
      std::ostringstream os;
      os << "shoot_p0: no convergence after " << evaluations
         << " evaluations, best |p(T) - f'(theta(T))| = " << std::abs(best_residual);
      throw ConvergenceError(os.str(), std::abs(best_residual));
    }

    double x = (r1 != r0) ? x1 - r1 * (x1 - x0) / (r1 - r0)
                          : std::numeric_limits<double>::quiet_NaN();
    if (bracketed) {
      const bool stalled = since_halving >= 3;
      if (!std::isfinite(x) || x <= lo || x >= hi || stalled) {
        x = 0.5 * (lo + hi);
        since_halving = 0;
      }
      if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(lo))) {
        std::ostringstream os;
        os << "shoot_p0: bracket collapsed at p0 = " << lo
           << " with residual " << std::abs(best_residual) << " (discontinuous residual)";
        throw ConvergenceError(os.str(), std::abs(best_residual));
      }
    } else if (!std::isfinite(x)) {
      x = x1 + (x1 - x0);
    } else {
      // Unbracketed secant steps are limited to avoid wild extrapolation.
      const double limit = 10.0 * std::max(1.0, std::abs(x1 - x0));
      x = std::clamp(x, x1 - limit, x1 + limit);
    }

    const double r = residual(x);
    if (bracketed) {
      if ((r < 0.0) == (r_lo < 0.0)) {
        lo = x;
        r_lo = r;
      } else {
        hi = x;
      }
      if (hi - lo <= 0.5 * width_before) {
        width_before = hi - lo;
        since_halving = 0;
      } else {
        ++since_halving;
      }
    } else {
      update_bracket(x1, r1, x, r);
      if (!bracketed) update_bracket(x0, r0, x, r);
      if (bracketed) width_before = hi - lo;
    }
    x0 = x1;
    r0 = r1;
    x1 = x;
    r1 = r;
  }
  return finish();
}

ControlledRun evaluate_control(const ModelParams& params, const CostSpec& cost,
                               const ControlSignal& control, double theta0, double T, double dt) {
  const std::size_t n = step_count(T, dt);
  const double h = T / static_cast<double>(n);
  const double th1 = params.theta1;
  auto f = [&](double t, double th) {
    const double relief = 1.0 - th1 * control(t);
    if (!(relief > 0.0)) throw DomainError("evaluate_control: 1 - theta1*u must be positive");
    return params.alpha(t, th) * (1.0 - th / relief);
  };

  ControlledRun run;
  run.times.resize(n + 1);
  run.theta.resize(n + 1);
  run.u.resize(n + 1);
  double th = theta0;
  for (std::size_t i = 0;; ++i) {
    const double t = h * static_cast<double>(i);
    run.times[i] = t;
    run.theta[i] = th;
    run.u[i] = control(t);
    if (i == n) break;
    const double k1 = f(t, th);
    const double k2 = f(t + 0.5 * h, th + 0.5 * h * k1);
    const double k3 = f(t + 0.5 * h, th + 0.5 * h * k2);
    const double k4 = f(t + h, th + h * k3);
    th += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  run.cost = eval_cost_JT(run.u, run.theta, cost, h);
  return run;
}

ControlGradient hamiltonian_gradient(const ModelParams& params, const CostSpec& cost,
                                     const ControlSignal& control, double theta0, double T,
                                     double dt) {
  require_time_only_alpha(params);
  const ControlledRun run = evaluate_control(params, cost, control, theta0, T, dt);
  const std::size_t n = run.times.size() - 1;
  const double h = T / static_cast<double>(n);
  const double th1 = params.theta1;

  auto theta_rate = [&](double t, double th) {
    return params.alpha.at(t) * (1.0 - th / (1.0 - th1 * control(t)));
  };
  auto p_rate = [&](double t, double p, double th) {
    return eval_adjoint_rhs(t, p, th, control(t), params.alpha.at(t), th1);
  };

  ControlGradient out;
  out.times = run.times;
  out.theta = run.theta;
  out.cost = run.cost;
  out.p.assign(n + 1, 0.0);
  out.dH_du.assign(n + 1, 0.0);

  // Backward RK4. theta at the half step comes from cubic Hermite
  // interpolation, which keeps the adjoint fourth-order accurate.
  double p = cost.terminal_prime(run.theta[n]);
  out.p[n] = p;
  for (std::size_t i = n; i > 0; --i) {
    const double t1 = run.times[i], t0 = run.times[i - 1];
    const double th1v = run.theta[i], th0v = run.theta[i - 1];
    const double d1 = theta_rate(t1, th1v), d0 = theta_rate(t0, th0v);
    const double th_mid = 0.5 * (th0v + th1v) + h / 8.0 * (d0 - d1);
    const double tm = 0.5 * (t0 + t1);
    const double k1 = p_rate(t1, p, th1v);
    const double k2 = p_rate(tm, p - 0.5 * h * k1, th_mid);
    const double k3 = p_rate(tm, p - 0.5 * h * k2, th_mid);
    const double k4 = p_rate(t0, p - h * k3, th0v);
    p -= h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    out.p[i - 1] = p;
  }

  for (std::size_t i = 0; i <= n; ++i) {
    const double u = run.u[i];
    const double relief = 1.0 - th1 * u;
    out.dH_du[i] = 2.0 * cost.k * u -
                   out.p[i] * params.alpha.at(run.times[i]) * run.theta[i] * th1 / (relief * relief);
  }
  return out;
}

}  // namespace anthracnose
