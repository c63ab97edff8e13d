#include <doctest.h>

#include <cmath>
#include <random>

#include "anthracnose/errors.hpp"
#include "anthracnose/model.hpp"
#include "oracles.hpp"

using namespace anthracnose;

namespace {

ModelParams seasonal_params(double theta1 = 0.6) {
  const SeasonalForcing s{4.0, 0.75, 0.2};
  return ModelParams::with_defaults(theta1, 1.0, 1.0,
                                    Forcing::of_time([s](double t) { return seasonal_alpha(s, t); }));
}

}  // namespace

TEST_CASE("rhs matches hand evaluation") {
  const ModelParams p = ModelParams::with_defaults(0.5, 0.8, 2.0, Forcing(3.0), 1.5, 2.0);
  const HostState x{0.25, 0.5, 0.2};
  const StateDerivative d = eval_rhs(0.0, x, 0.4, p);
  CHECK(d.dtheta == doctest::Approx(3.0 * (1.0 - 0.25 / 0.8)).epsilon(1e-14));
  // eta = theta2, so v theta2 / ((1 - theta) eta v_max) = v / ((1 - theta) v_max).
  CHECK(d.dv == doctest::Approx(1.5 * (1.0 - 0.5 / (0.75 * 2.0))).epsilon(1e-14));
  CHECK(d.dv_r == doctest::Approx(2.0 * 0.25 * (1.0 - 0.2 / 0.5)).epsilon(1e-14));
}

TEST_CASE("rhs guards its denominators") {
  const ModelParams p = ModelParams::with_defaults(0.5, 1.0, 1.0, Forcing(1.0));
  CHECK_THROWS_AS(eval_rhs(0.0, {1.0, 0.5, 0.1}, 0.0, p), DomainError);
  CHECK_THROWS_AS(eval_rhs(0.0, {0.5, 0.0, 0.0}, 0.0, p), DomainError);
  CHECK_THROWS_AS(eval_rhs(0.0, {0.5, 0.5, 0.0}, 2.0, p), DomainError);
}

TEST_CASE("constant forcing reproduces the closed form") {
  const double a = 2.5, theta0 = 0.1, u = 0.7, th1 = 0.6;
  const ModelParams p = ModelParams::with_defaults(th1, 1.0, 1.0, Forcing(a));
  const Trajectory tr = integrate_ode(p, ControlSignal::constant(u), {theta0, 0.3, 0.1}, 0.0, 1.0, 1e-3);
  const double r = 1.0 - th1 * u;
  for (std::size_t i = 0; i < tr.times.size(); i += 100) {
    const double exact = r + (theta0 - r) * std::exp(-a * tr.times[i] / r);
    CHECK(tr.states[i].theta == doctest::Approx(exact).epsilon(1e-11));
  }
  CHECK(tr.times.back() == 1.0);
}

TEST_CASE("zero forcing leaves theta flat") {
  const ModelParams p = ModelParams::with_defaults(0.6, 1.0, 1.0, Forcing(0.0));
  const Trajectory tr = integrate_ode(p, ControlSignal::constant(0.3), {0.4, 0.2, 0.0}, 0.0, 1.0, 1e-2);
  for (const auto& s : tr.states) CHECK(s.theta == 0.4);
}

TEST_CASE("final state agrees with an adaptive integrator") {
  const ModelParams p = seasonal_params();
  const HostState x0{0.2, 0.3, 0.05};
  const double u = 0.35;
  const Trajectory tr = integrate_ode(p, ControlSignal::constant(u), x0, 0.0, 1.0, 1e-3);
  const SeasonalForcing s{4.0, 0.75, 0.2};
  auto f = [&](double t, const oracle::Vec& y) -> oracle::Vec {
    const double a = seasonal_alpha(s, t);
    return {a * (1.0 - y[0] / (1.0 - 0.6 * u)), 1.0 * (1.0 - y[1] / ((1.0 - y[0]) * 1.0)),
            1.0 * y[0] * (1.0 - y[2] / y[1])};
  };
  const auto ref = oracle::dopri(f, {x0.theta, x0.v, x0.v_r}, 0.0, 1.0);
  CHECK(std::abs(tr.final_state().theta - ref[0]) < 1e-6);
  CHECK(std::abs(tr.final_state().v - ref[1]) < 1e-6);
  CHECK(std::abs(tr.final_state().v_r - ref[2]) < 1e-6);
}

TEST_CASE("integrator is fourth order") {
  const ModelParams p = seasonal_params();
  const HostState x0{0.2, 0.3, 0.05};
  const auto ctl = ControlSignal::constant(0.5);
  const double ref = integrate_ode(p, ctl, x0, 0.0, 1.0, 1.0 / 6400).final_state().theta;
  const double e1 = std::abs(integrate_ode(p, ctl, x0, 0.0, 1.0, 1.0 / 100).final_state().theta - ref);
  const double e2 = std::abs(integrate_ode(p, ctl, x0, 0.0, 1.0, 1.0 / 200).final_state().theta - ref);
  const double order = std::log2(e1 / e2);
  CHECK(order > 3.7);
  CHECK(order < 4.4);
}

TEST_CASE("integrator rejects a step longer than the horizon") {
  const ModelParams p = seasonal_params();
  CHECK_THROWS_AS(integrate_ode(p, ControlSignal::constant(0.0), {0.2, 0.3, 0.0}, 0.0, 1.0, 2.0),
                  DomainError);
}

TEST_CASE("control signal validation and interpolation") {
  CHECK_THROWS_AS(ControlSignal({0.0, 1.0}, {0.0, 1.5}), DomainError);
  CHECK_THROWS_AS(ControlSignal({0.0, 0.0}, {0.0, 0.5}), DomainError);
  CHECK_THROWS_AS(ControlSignal({0.0, 0.1}, {0.0, 1.0}, 5.0), DomainError);
  const ControlSignal c({0.0, 0.5, 1.0}, {0.0, 1.0, 0.5}, 2.0);
  CHECK(c(0.25) == doctest::Approx(0.5));
  CHECK(c(0.75) == doctest::Approx(0.75));
  CHECK(c(-1.0) == 0.0);
  CHECK(c(2.0) == 0.5);
}

TEST_CASE("seasonal forcing") {
  const SeasonalForcing s{4.0, 0.75, 0.2};
  CHECK(seasonal_alpha(s, 0.0) == doctest::Approx(0.0));
  CHECK(seasonal_alpha(s, 0.1) == doctest::Approx(4.0 * 0.65 * 0.65 * 2.0));
  CHECK_THROWS_AS((SeasonalForcing{1.0, 1.5, 0.2}.validate()), DomainError);
  CHECK_THROWS_AS((SeasonalForcing{1.0, 0.5, 0.0}.validate()), DomainError);
}

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS(ModelParams::with_defaults(1.0, 1.0, 1.0, Forcing(1.0)).validate(), DomainError);
  CHECK_THROWS_AS(ModelParams::with_defaults(0.5, 0.0, 1.0, Forcing(1.0)).validate(), DomainError);
  CHECK_THROWS_AS(ModelParams::with_defaults(0.5, 1.0, 1.0, Forcing(-1.0)).validate(), DomainError);
  CHECK_NOTHROW(seasonal_params().validate());
}

TEST_CASE("region classification") {
  const ModelParams p = ModelParams::with_defaults(0.6, 1.0, 1.0, Forcing(1.0));
  const RegionReport inside = check_region({0.3, 0.5, 0.2}, p);
  CHECK(inside.in_S);
  CHECK(inside.in_BS);
  CHECK(inside.violated_constraints.empty());

  const RegionReport face = check_region({0.3, 1.0, 1.0}, p);
  CHECK(face.in_BS);
  CHECK(face.boundary_faces.size() == 2);

  const RegionReport over = check_region({0.3, 1.2, 0.1}, p);
  CHECK(over.in_S);
  CHECK_FALSE(over.in_BS);

  const RegionReport one = check_region({1.0, 0.5, 0.1}, p);
  CHECK_FALSE(one.in_S);
  CHECK_FALSE(one.in_BS);
}

// theta < 1, v <= v_max and the sign constraints hold along random
// trajectories. The face v_r <= v is not invariant, see below.
TEST_CASE("faces F1 and F2 and positivity are preserved") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const double th1 = 0.05 + 0.9 * U(rng), vmax = 0.5 + U(rng);
    const ModelParams p = ModelParams::with_defaults(th1, 0.2 + 0.8 * U(rng), vmax, Forcing(5.0 * U(rng)),
                                                     U(rng) * 2.0, U(rng) * 2.0);
    std::vector<double> t, v;
    for (int k = 0; k <= 10; ++k) {
      t.push_back(0.1 * k);
      v.push_back(U(rng));
    }
    const HostState x0{0.99 * U(rng), vmax * (0.01 + 0.99 * U(rng)), 0.0};
    const Trajectory tr = integrate_ode(p, ControlSignal(t, v), {x0.theta, x0.v, x0.v * U(rng)}, 0.0, 1.0, 1e-3);
    for (const auto& s : tr.states) {
      REQUIRE(s.theta >= -1e-12);
      REQUIRE(s.theta < 1.0);
      REQUIRE(s.v > 0.0);
      REQUIRE(s.v <= vmax + 1e-9);
      REQUIRE(s.v_r >= -1e-12);
    }
  }
}

TEST_CASE("face F3 leaks when v shrinks") {
  // v = 0.5 exceeds (1 - theta) v_max = 0.1, so v decreases while v_r, starting
  // just below v, keeps growing.
  const ModelParams p = ModelParams::with_defaults(0.6, 1.0, 1.0, Forcing(1.0));
  const Trajectory tr = integrate_ode(p, ControlSignal::constant(0.0), {0.9, 0.5, 0.49}, 0.0, 1.0, 1e-3);
  double worst = 0.0;
  for (const auto& s : tr.states) worst = std::min(worst, s.v - s.v_r);
  CHECK(worst < -1e-3);
}
