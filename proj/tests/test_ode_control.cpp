#include <doctest.h>

#include <cmath>
#include <random>

#include "anthracnose/errors.hpp"
#include "anthracnose/ode_control.hpp"
#include "oracles.hpp"

using namespace anthracnose;

namespace {

ModelParams fig_params() {
  const SeasonalForcing s{4.0, 0.75, 0.2};
  return ModelParams::with_defaults(0.6, 1.0, 1.0,
                                    Forcing::of_time([s](double t) { return seasonal_alpha(s, t); }));
}

}  // namespace

TEST_CASE("cost spec validation") {
  CHECK_NOTHROW(CostSpec::linear_terminal(1.0).validate());
  CHECK_NOTHROW(CostSpec::quadratic_terminal(2.0, 0.5).validate());
  CHECK_THROWS_AS(CostSpec::no_terminal(0.0).validate(), DomainError);
  CostSpec bad = CostSpec::linear_terminal(1.0);
  bad.terminal_prime = [](double) { return 2.0; };
  CHECK_THROWS_AS(bad.validate(), DomainError);
}

TEST_CASE("cubic root agrees with a dense-scan oracle") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const double k = 0.1 + 5.0 * U(rng);
    const double c3 = (8.0 * k / 27.0) * (2.0 * U(rng) - 1.0) * 0.999;
    const double th1 = 0.05 + 0.9 * U(rng);
    const FeedbackCubic fc = solve_feedback_cubic(c3, k, th1);
    REQUIRE_FALSE(fc.bang);
    const double ref = oracle::smallest_root([&](double w) { return c3 * w * w * w - 2 * k * w + 2 * k; }, 0.0, 1.5);
    CHECK(fc.root == doctest::Approx(ref).epsilon(1e-9));
    CHECK(std::abs(feedback_cubic_residual(c3, k, fc.root)) < 1e-10);
    CHECK(fc.w3 >= 1.0);
    CHECK(fc.w3 <= std::min(1.5, 1.0 / (1.0 - th1)) + 1e-15);
  }
}

TEST_CASE("cubic threshold root is 3/2") {
  for (double k : {0.5, 1.0, 3.0}) {
    const double c3 = 8.0 * k / 27.0;
    CHECK(feedback_cubic_residual(c3, k, 1.5) == doctest::Approx(0.0).scale(k));
    const FeedbackCubic fc = solve_feedback_cubic(c3, k, 0.6);
    CHECK(fc.bang);
    const FeedbackCubic below = solve_feedback_cubic(std::nextafter(c3, 0.0), k, 0.6);
    CHECK_FALSE(below.bang);
    CHECK(below.root == doctest::Approx(1.5).epsilon(1e-6));
  }
}

TEST_CASE("feedback law limits") {
  CHECK(optimal_u_feedback(1.0, 0.5, 0.0, 0.6, 1.0) == doctest::Approx(0.0).scale(1.0));
  CHECK(optimal_u_feedback(10.0, 0.9, 5.0, 0.6, 1.0) == 1.0);
  // Just under the threshold the interior branch gives w3 = 3/2, u = 1 / (3 theta1).
  const double th1 = 0.6, k = 1.0, alpha = 1.0, theta = 0.5;
  const double p = 8.0 * k / (27.0 * alpha * th1 * th1 * theta) * (1.0 - 1e-12);
  CHECK(optimal_u_feedback(alpha, theta, p, th1, k) == doctest::Approx(1.0 / (3.0 * th1)).epsilon(1e-4));
  CHECK_THROWS_AS(optimal_u_feedback(1.0, 0.5, 1.0, 0.0, 1.0), DomainError);
}

TEST_CASE("adjoint rhs") {
  CHECK(eval_adjoint_rhs(0.0, 2.0, 0.5, 0.5, 3.0, 0.6) == doctest::Approx(3.0 * 2.0 / 0.7 - 1.0));
}

TEST_CASE("cost quadrature") {
  const std::vector<double> ones(101, 1.0), zeros(101, 0.0);
  CHECK(eval_cost_JT(zeros, ones, CostSpec::no_terminal(1.0), 0.01) == doctest::Approx(1.0));
  CHECK(eval_cost_JT(zeros, ones, CostSpec::linear_terminal(1.0), 0.01) == doctest::Approx(2.0));
  CHECK(eval_cost_JT(ones, zeros, CostSpec::no_terminal(3.0), 0.01) == doctest::Approx(3.0));
  CHECK_THROWS_AS(eval_cost_JT(std::vector<double>(3, 0.0), ones, CostSpec::no_terminal(1.0), 0.01),
                  DomainError);
}

TEST_CASE("shooting meets the transversality condition") {
  const ModelParams p = fig_params();
  const CostSpec cost = CostSpec::linear_terminal(1.0);
  for (double theta0 : {0.2, 0.5}) {
    const OptimalSolution sol = shoot_p0(theta0, p, cost, 1.0, 1e-3);
    CHECK(std::abs(sol.adjoint.back() - 1.0) < 1e-8);
    CHECK(sol.cost == doctest::Approx(eval_cost_JT(sol.u, sol.theta, cost, 1e-3)));
    const double j0 = evaluate_control(p, cost, ControlSignal::constant(0.0), theta0, 1.0, 1e-3).cost;
    const double j1 = evaluate_control(p, cost, ControlSignal::constant(1.0), theta0, 1.0, 1e-3).cost;
    CHECK(sol.cost <= std::min(j0, j1));
    // The open-loop replay of u* costs the same up to interpolation across the
    // bang switches, and cannot beat the optimum by more than that.
    const double replay = evaluate_control(p, cost, sol.control, theta0, 1.0, 1e-3).cost;
    CHECK(replay == doctest::Approx(sol.cost).epsilon(2e-3));
  }
}

TEST_CASE("shooting reports non-convergence") {
  ShootingOptions opt;
  opt.max_iter = 2;
  opt.tol = 1e-15;
  CHECK_THROWS_AS(shoot_p0(0.2, fig_params(), CostSpec::linear_terminal(1.0), 1.0, 1e-3, opt),
                  ConvergenceError);
}

TEST_CASE("shooting requires time-only forcing") {
  ModelParams p = fig_params();
  p.alpha = Forcing::of_time_and_state([](double, double th) { return th; });
  CHECK_THROWS_AS(shoot_p0(0.2, p, CostSpec::linear_terminal(1.0), 1.0, 1e-2), DomainError);
}

TEST_CASE("open-loop evaluation matches the closed form") {
  const ModelParams p = ModelParams::with_defaults(0.6, 1.0, 1.0, Forcing(2.0));
  const ControlledRun run = evaluate_control(p, CostSpec::no_terminal(1.0), ControlSignal::constant(0.5), 0.1, 1.0, 1e-3);
  const double r = 0.7;
  CHECK(run.theta.back() == doctest::Approx(r + (0.1 - r) * std::exp(-2.0 / r)).epsilon(1e-11));
}

TEST_CASE("Hamiltonian gradient matches finite differences") {
  const ModelParams p = fig_params();
  const CostSpec cost = CostSpec::quadratic_terminal(1.0, 0.7);
  const double T = 1.0, dt = 1e-3;
  std::vector<double> t, u;
  for (int i = 0; i <= 20; ++i) {
    t.push_back(i / 20.0);
    u.push_back(0.3 + 0.2 * std::sin(3.0 * i / 20.0));
  }
  const ControlGradient g = hamiltonian_gradient(p, cost, ControlSignal(t, u), 0.3, T, dt);
  auto phi = [](double s) { return std::exp(-std::pow((s - 0.4) / 0.1, 2)); };
  double predicted = 0.0;
  for (std::size_t i = 0; i < g.times.size(); ++i) {
    const double w = (i == 0 || i + 1 == g.times.size()) ? 0.5 : 1.0;
    predicted += w * dt * g.dH_du[i] * phi(g.times[i]);
  }
  auto perturbed = [&](double h) {
    std::vector<double> tt, uu;
    for (int i = 0; i <= 1000; ++i) {
      tt.push_back(i * 1e-3);
      uu.push_back(ControlSignal(t, u)(i * 1e-3) + h * phi(i * 1e-3));
    }
    return evaluate_control(p, cost, ControlSignal(tt, uu), 0.3, T, dt).cost;
  };
  const double h = 1e-4;
  const double fd = (perturbed(h) - perturbed(-h)) / (2 * h);
  CHECK(std::abs(predicted - fd) < 1e-3 * std::abs(fd));
}
