#include "anthracnose/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "anthracnose/errors.hpp"

namespace anthracnose {

Forcing::Forcing(double value) : fn_([value](double, double) { return value; }) {}

Forcing::Forcing(TimeStateFn f, bool state_dependent)
    : fn_(std::move(f)), state_dependent_(state_dependent) {}

Forcing Forcing::of_time(TimeFn f) {
  return Forcing([f = std::move(f)](double t, double) { return f(t); }, false);
}

Forcing Forcing::of_time_and_state(TimeStateFn f) { return Forcing(std::move(f), true); }

Forcing Forcing::proportional_to_state(double gain) {
  return Forcing([gain](double, double theta) { return gain * theta; }, true);
}

void SeasonalForcing::validate() const {
  if (!(a >= 0.0)) throw DomainError("seasonal forcing: amplitude a must be >= 0");
  if (!(b >= 0.0 && b <= 1.0)) throw DomainError("seasonal forcing: phase b must lie in [0,1]");
  if (!(c > 0.0 && c <= 1.0)) throw DomainError("seasonal forcing: period c must lie in (0,1]");
}

double seasonal_alpha(const SeasonalForcing& f, double t) {
  const double d = t - f.b;
  return f.a * d * d * (1.0 - std::cos(2.0 * std::numbers::pi * t / f.c));
}

ModelParams ModelParams::with_defaults(double theta1, double theta2, double v_max, Forcing alpha,
                                       double beta0, double gamma0) {
  ModelParams p;
  p.theta1 = theta1;
  p.theta2 = theta2;
  p.v_max = v_max;
  p.alpha = std::move(alpha);
  p.beta = Forcing(beta0);
  p.gamma = Forcing::proportional_to_state(gamma0);
  p.eta = [theta2](double) { return theta2; };
  return p;
}

void ModelParams::validate(double t0, double t1, int samples) const {
  auto fail = [](const std::string& msg) { throw DomainError("model params: " + msg); };
  if (!(theta1 >= 0.0 && theta1 < 1.0)) fail("theta1 must lie in [0,1)");
  if (!(theta2 > 0.0 && theta2 <= 1.0)) fail("theta2 must lie in (0,1]");
  if (!(v_max > 0.0)) fail("v_max must be > 0");
  if (!eta) fail("eta is not set");
  samples = std::max(samples, 2);
  for (int i = 0; i < samples; ++i) {
    const double t = t0 + (t1 - t0) * i / (samples - 1);
    const double e = eta(t);
    if (!(e > 0.0 && e <= theta2)) {
      std::ostringstream os;
      os << "eta(" << t << ") = " << e << " outside (0, theta2]";
      fail(os.str());
    }
    if (gamma(t, 0.0) != 0.0) fail("gamma(t, 0) must vanish");
    double prev_gamma = 0.0;
    for (int j = 0; j < samples; ++j) {
      const double theta = 0.999 * j / (samples - 1);
      const double a = alpha(t, theta), b = beta(t, theta), g = gamma(t, theta);
      if (!(a >= 0.0 && b >= 0.0 && g >= 0.0)) {
        std::ostringstream os;
        os << "negative forcing at t=" << t << ", theta=" << theta;
        fail(os.str());
      }
      if (g < prev_gamma) fail("gamma must be nondecreasing in theta");
      prev_gamma = g;
    }
  }
}

ControlSignal::ControlSignal(std::vector<double> times, std::vector<double> values,
                             std::optional<double> lipschitz_bound)
    : times_(std::move(times)), values_(std::move(values)), lipschitz_bound_(lipschitz_bound) {
  if (times_.empty() || times_.size() != values_.size())
    throw DomainError("control signal: times and values must be non-empty and of equal length");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!(values_[i] >= 0.0 && values_[i] <= 1.0))
      throw DomainError("control signal: values must lie in [0,1]");
    if (i > 0 && !(times_[i] > times_[i - 1]))
      throw DomainError("control signal: times must be strictly increasing");
  }
  if (lipschitz_bound_) {
    const double K = *lipschitz_bound_;
    if (!(K >= 0.0)) throw DomainError("control signal: Lipschitz bound must be >= 0");
    for (std::size_t i = 1; i < values_.size(); ++i) {
      const double lhs = std::abs(values_[i] - values_[i - 1]);
      if (lhs > K * (times_[i] - times_[i - 1]) * (1.0 + 1e-12) + 1e-15)
        throw DomainError("control signal: samples violate the Lipschitz bound");
    }
  }
}

ControlSignal ControlSignal::constant(double value) { return ControlSignal({0.0}, {value}, 0.0); }

double ControlSignal::operator()(double t) const {
  if (t <= times_.front()) return values_.front();
  if (t >= times_.back()) return values_.back();
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  const std::size_t hi = static_cast<std::size_t>(it - times_.begin());
  const std::size_t lo = hi - 1;
  const double w = (t - times_[lo]) / (times_[hi] - times_[lo]);
  return values_[lo] + w * (values_[hi] - values_[lo]);
}

StateDerivative eval_rhs(double t, const HostState& x, double u_val, const ModelParams& p) {
  const double relief = 1.0 - p.theta1 * u_val;
  if (!(relief > 0.0)) throw DomainError("eval_rhs: 1 - theta1*u must be positive");
  if (x.theta == 1.0) throw DomainError("eval_rhs: theta reached 1 (state left S)");
  if (!(x.v > 0.0)) throw DomainError("eval_rhs: fruit volume must be positive (state left S)");

  const double a = p.alpha(t, x.theta);
  const double b = p.beta(t, x.theta);
  const double g = p.gamma(t, x.theta);
  StateDerivative d;
  d.dtheta = a * (1.0 - x.theta / relief);
  d.dv = b * (1.0 - x.v * p.theta2 / ((1.0 - x.theta) * p.eta(t) * p.v_max));
  d.dv_r = g * (1.0 - x.v_r / x.v);
  return d;
}

namespace {

HostState axpy(const HostState& x, double h, const StateDerivative& d) {
  return {x.theta + h * d.dtheta, x.v + h * d.dv, x.v_r + h * d.dv_r};
}

}  // namespace

Trajectory integrate_ode(const ModelParams& p, const ControlSignal& u, const HostState& x0,
                         double t0, double T, double dt) {
  if (!(T > t0)) throw DomainError("integrate_ode: T must exceed t0");
  if (!(dt > 0.0)) throw DomainError("integrate_ode: dt must be positive");
  if (dt > (T - t0) * (1.0 + 1e-12)) throw DomainError("integrate_ode: dt exceeds T - t0");

  const auto n = static_cast<std::size_t>(std::ceil((T - t0) / dt - 1e-9));
  const double h = (T - t0) / static_cast<double>(n);

  Trajectory traj;
  traj.times.reserve(n + 1);
  traj.states.reserve(n + 1);
  traj.times.push_back(t0);
  traj.states.push_back(x0);

  HostState x = x0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = t0 + h * static_cast<double>(i);
    const double tm = t + 0.5 * h;
    const double te = t0 + h * static_cast<double>(i + 1);
    const auto k1 = eval_rhs(t, x, u(t), p);
    const auto k2 = eval_rhs(tm, axpy(x, 0.5 * h, k1), u(tm), p);
    const auto k3 = eval_rhs(tm, axpy(x, 0.5 * h, k2), u(tm), p);
    const auto k4 = eval_rhs(te, axpy(x, h, k3), u(te), p);
    x.theta += h / 6.0 * (k1.dtheta + 2.0 * k2.dtheta + 2.0 * k3.dtheta + k4.dtheta);
    x.v += h / 6.0 * (k1.dv + 2.0 * k2.dv + 2.0 * k3.dv + k4.dv);
    x.v_r += h / 6.0 * (k1.dv_r + 2.0 * k2.dv_r + 2.0 * k3.dv_r + k4.dv_r);
    if (!std::isfinite(x.theta) || !std::isfinite(x.v) || !std::isfinite(x.v_r)) {
      std::ostringstream os;
      os << "integrate_ode: non-finite state at t=" << te;
      throw DomainError(os.str());
    }
    traj.times.push_back(te);
    traj.states.push_back(x);
  }
  return traj;
}

Trajectory integrate_ode(const ModelParams& p, const ControlSignal& u, const HostState& x0,
                         double t0, double T) {
  return integrate_ode(p, u, x0, t0, T, 1e-3 * (T - t0));
}

RegionReport check_region(const HostState& x, const ModelParams& p, double tolerance) {
  RegionReport r;
  auto add = [&](std::string name, std::string face, double slack, bool strict) {
    const bool ok = strict ? slack > 0.0 : slack >= -tolerance;
    r.constraints.push_back({std::move(name), std::move(face), slack, strict, ok});
    return ok;
  };

  // S = (R+ \ {1}) x R+* x R+
  bool s_ok = true;
  s_ok &= add("S: theta >= 0", "", x.theta, false);
  s_ok &= add("S: theta != 1", "", std::abs(1.0 - x.theta), true);
  s_ok &= add("S: v > 0", "", x.v, true);
  s_ok &= add("S: v_r >= 0", "", x.v_r, false);

  bool bs_ok = true;
  bs_ok &= add("BS: theta >= 0", "", x.theta, false);
  bs_ok &= add("BS: theta < 1", "F1", 1.0 - x.theta, true);
  bs_ok &= add("BS: v > 0", "", x.v, true);
  bs_ok &= add("BS: v <= v_max", "F2", p.v_max - x.v, false);
  bs_ok &= add("BS: v_r >= 0", "", x.v_r, false);
  bs_ok &= add("BS: v_r <= v", "F3", x.v - x.v_r, false);

  r.in_S = s_ok;
  r.in_BS = bs_ok;
  for (const auto& c : r.constraints) {
    if (!c.satisfied) r.violated_constraints.push_back(c.name);
    if (!c.face.empty() && std::abs(c.slack) <= tolerance) r.boundary_faces.push_back(c.face);
  }
  return r;
}

}  // namespace anthracnose
