#pragma once

// Within-host anthracnose model: inhibition rate theta, fruit volume v and
// rotten volume v_r driven by environmental forcings and a control u in [0,1].

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace anthracnose {

/// Tolerance used by region checks to absorb roundoff on invariant faces.
inline constexpr double kRegionTolerance = 1e-9;

struct HostState {
  double theta = 0.0;  ///< effective inhibition rate (dimensionless)
  double v = 0.0;      ///< fruit volume
  double v_r = 0.0;    ///< rotten volume, same units as v
};

struct StateDerivative {
  double dtheta = 0.0;
  double dv = 0.0;
  double dv_r = 0.0;
};

/// A rate forcing that depends on time and, optionally, on theta.
class Forcing {
 public:
  using TimeFn = std::function<double(double)>;
  using TimeStateFn = std::function<double(double, double)>;

  /// Constant forcing.
  explicit Forcing(double value = 0.0);

  static Forcing of_time(TimeFn f);
  static Forcing of_time_and_state(TimeStateFn f);
  /// gamma0 * theta, the default rotting forcing.
  static Forcing proportional_to_state(double gain);

  double operator()(double t, double theta) const { return fn_(t, theta); }
  /// Value for time-only forcings; theta is ignored.
  double at(double t) const { return fn_(t, 0.0); }
  bool depends_on_state() const noexcept { return state_dependent_; }

 private:
  Forcing(TimeStateFn f, bool state_dependent);
  TimeStateFn fn_;
  bool state_dependent_ = false;
};

/// Seasonal inhibition pressure a (t - b)^2 (1 - cos(2 pi t / c)).
struct SeasonalForcing {
  double a = 0.0;  ///< amplitude rate, >= 0
  double b = 0.0;  ///< phase time in [0,1]
  double c = 1.0;  ///< period in (0,1]

  void validate() const;
};

double seasonal_alpha(const SeasonalForcing& f, double t);

struct ModelParams {
  double theta1 = 0.0;  ///< 1 - theta1 is the floor reachable under full control; in [0,1)
  double theta2 = 1.0;  ///< in (0,1]
  double v_max = 1.0;
  Forcing alpha{0.0};
  Forcing beta{0.0};
  Forcing gamma{0.0};
  std::function<double(double)> eta;  ///< values in (0, theta2]

  /// Defaults for unspecified forcings: beta = beta0, gamma = gamma0 * theta,
  /// eta = theta2.
  static ModelParams with_defaults(double theta1, double theta2, double v_max, Forcing alpha,
                                   double beta0 = 1.0, double gamma0 = 1.0);

  /// Sampled invariant checks over t in [t0, t1] and theta in [0, 1).
  /// Throws DomainError describing the first violated constraint.
  void validate(double t0 = 0.0, double t1 = 1.0, int samples = 64) const;
};

/// Control sampled on a time grid, evaluated by linear interpolation and held
/// constant outside the grid.
class ControlSignal {
 public:
  ControlSignal(std::vector<double> times, std::vector<double> values,
                std::optional<double> lipschitz_bound = std::nullopt);

  static ControlSignal constant(double value);

  double operator()(double t) const;
  std::span<const double> times() const noexcept { return times_; }
  std::span<const double> values() const noexcept { return values_; }
  std::optional<double> lipschitz_bound() const noexcept { return lipschitz_bound_; }

 private:
  std::vector<double> times_;
  std::vector<double> values_;
  std::optional<double> lipschitz_bound_;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<HostState> states;

  const HostState& final_state() const { return states.back(); }
};

/// Right-hand side of the within-host system. Throws DomainError when a
/// denominator vanishes (1 - theta1 u <= 0, theta == 1, v <= 0).
StateDerivative eval_rhs(double t, const HostState& x, double u_val, const ModelParams& p);

/// Classical fixed-step RK4 on [t0, T]. The step is shrunk to (T - t0) / n
/// with n = ceil((T - t0) / dt) so the grid ends exactly at T.
Trajectory integrate_ode(const ModelParams& p, const ControlSignal& u, const HostState& x0,
                         double t0, double T, double dt);

/// Same, with the default step 1e-3 (T - t0).
Trajectory integrate_ode(const ModelParams& p, const ControlSignal& u, const HostState& x0,
                         double t0, double T);

struct RegionConstraint {
  std::string name;
  std::string face;  ///< "F1", "F2", "F3" for the bounded-region faces, else empty
  double slack = 0.0;
  bool strict = false;
  bool satisfied = false;
};

struct RegionReport {
  bool in_S = false;
  bool in_BS = false;
  std::vector<RegionConstraint> constraints;
  std::vector<std::string> violated_constraints;
  std::vector<std::string> boundary_faces;  ///< BS faces with |slack| <= tolerance
};

/// Evaluates every inequality defining S and BS with its signed slack.
/// Non-strict inequalities accept slack >= -tolerance; strict ones need slack > 0.
RegionReport check_region(const HostState& x, const ModelParams& p,
                          double tolerance = kRegionTolerance);

}  // namespace anthracnose
