#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "anthracnose/errors.hpp"
#include "anthracnose/severity.hpp"

using namespace anthracnose;

TEST_CASE("severity index") {
  CHECK(eval_asi({}, 20.0, 8.0) == 0.0);
  AsiCoefficients c;
  c.a0 = 1.0;
  CHECK(eval_asi(c, 20.0, 8.0) == 1.0);
  AsiCoefficients tw;
  tw.a11 = 1.0;
  CHECK(eval_asi(tw, 2.0, 3.0) == 6.0);
  AsiCoefficients sq;
  sq.a02 = 1.0;
  CHECK(eval_asi(sq, 2.0, 3.0) == 4.0);  // a02 multiplies T^2
  sq = {};
  sq.a20 = 1.0;
  CHECK(eval_asi(sq, 2.0, 3.0) == 9.0);  // a20 multiplies W^2
}

TEST_CASE("appressoria fraction") {
  CHECK(eval_dodd_fraction({}, 25.0, 90.0, 1.0) == doctest::Approx(0.5));
  DoddCoefficients c;
  c.b = 1.0;
  CHECK(eval_dodd_fraction(c, 0.0, 0.0, std::exp(1.0)) == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
  CHECK(eval_dodd_fraction(c, 0.0, 0.0, std::exp(1.0)) == doctest::Approx(0.731).epsilon(1e-3));
  CHECK_THROWS_AS(eval_dodd_fraction(c, 0.0, 0.0, 0.0), DomainError);
  CHECK_THROWS_AS(eval_dodd_fraction(c, 0.0, 0.0, -1.0), DomainError);

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    DoddCoefficients r{U(rng), 0.05 * U(rng), 0.1 * U(rng), 1e-3 * U(rng), 1e-3 * U(rng), 2.0 * std::abs(U(rng))};
    const double T = 25 + 5 * U(rng), H = 80 + 10 * U(rng), t = 1.0 + 10.0 * std::abs(U(rng));
    const double p = eval_dodd_fraction(r, T, H, t);
    CHECK(p > 0.0);
    CHECK(p < 1.0);
    CHECK(p == doctest::Approx(1.0 / (1.0 + std::exp(-dodd_logit(r, T, H, t)))).epsilon(1e-14));
    if (r.b > 0.0) CHECK(eval_dodd_fraction(r, T, H, 2.0 * t) >= p);
  }
}

TEST_CASE("temperature-wetness response") {
  DuthieCoefficients c{2.0, 0.3, 1.0, 1.5, 0.8, 22.0, 0.4, 2.0, DuthieForm::form1};
  CHECK(eval_duthie_response(c, 20.0, 1.0) == 0.0);
  c.form = DuthieForm::form2;
  CHECK(eval_duthie_response(c, 20.0, 1.0) == 0.0);
  CHECK(eval_duthie_response(c, 20.0, 1e6) == doctest::Approx(2.0));
  CHECK_THROWS_AS(eval_duthie_response(c, 20.0, 0.5), DomainError);

  // At T = t_mid both exponentials are 1.
  const double h = c.h, e = c.e;
  CHECK(duthie_temperature_factor(c, 22.0) ==
        doctest::Approx(e * (1 + h) * std::pow(h, h / (1 + h)) / 2.0).epsilon(1e-14));
  const double z = c.g * (30.0 - 22.0);
  CHECK(duthie_temperature_factor(c, 30.0) ==
        doctest::Approx(e * (1 + h) * std::pow(h, h / (1 + h)) * std::exp(z / (1 + h)) / (1 + std::exp(z))).epsilon(1e-13));

  DuthieCoefficients bad = c;
  bad.g = 0.0;
  CHECK_THROWS_AS(bad.validate(), DomainError);
}

TEST_CASE("response is nondecreasing in wetness") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    DuthieCoefficients c{0.5 + U(rng), 0.05 + U(rng), 2.0 * U(rng), 0.5 + 2.0 * U(rng), 0.2 + U(rng),
                         15.0 + 10.0 * U(rng), 0.05 + U(rng), 0.2 + 3.0 * U(rng),
                         trial % 2 ? DuthieForm::form1 : DuthieForm::form2};
    c.validate();
    const double T = 10.0 + 25.0 * U(rng);
    double prev = -1.0;
    for (double W = c.c; W < c.c + 48.0; W += 0.5) {
      const double r = eval_duthie_response(c, T, W);
      CHECK(r >= prev);
      prev = r;
    }
  }
}

TEST_CASE("form1 with matched parameters equals form2") {
  // With e chosen so that f(T) = a at the given T, and b = f(T), the forms agree.
  DuthieCoefficients c{1.7, 1.0, 0.5, 1.3, 1.0, 20.0, 0.3, 1.5, DuthieForm::form1};
  const double T = 23.0;
  const double unit = duthie_temperature_factor(c, T);
  c.e = c.a / unit;
  c.b = duthie_temperature_factor(c, T);
  DuthieCoefficients c2 = c;
  c2.form = DuthieForm::form2;
  for (double W : {0.5, 1.0, 3.0, 10.0})
    CHECK(eval_duthie_response(c, T, W) == doctest::Approx(eval_duthie_response(c2, T, W)).epsilon(1e-13));
}

TEST_CASE("weather series and alpha adapter") {
  const auto path = std::filesystem::temp_directory_path() / "anthracnose_weather_test.csv";
  {
    std::ofstream f(path);
    f << "# hourly\nt,T,W,H\n0,20,2,80\n1,30,6,90\n";
  }
  const WeatherSeries w = read_weather_csv(path.string());
  const auto mid = w.at(0.25);
  CHECK(mid.T == doctest::Approx(22.5));
  CHECK(mid.W == doctest::Approx(3.0));
  CHECK(w.at(5.0).H == 90.0);

  AsiCoefficients c;
  c.a10 = 0.1;
  const Forcing a = severity_forcing(c, w, 2.0);
  CHECK(a.at(0.5) == doctest::Approx(2.0 * 0.1 * 25.0));
  AsiCoefficients negative;
  negative.a0 = -1.0;
  CHECK_THROWS_AS(severity_forcing(negative, w, 1.0).at(0.0), DomainError);

  {
    std::ofstream f(path);
    f << "t,T,W\n0,1,2\n";
  }
  CHECK_THROWS_AS(read_weather_csv(path.string()), ConfigError);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(read_weather_csv(path.string()), IoError);
}
