#pragma once

// Weather-driven disease pressure regressions, usable as alpha forcing.
// Coefficients carry the units of T (temperature), W (wetness hours) and
// H (relative humidity); the evaluators treat inputs as raw numbers.

#include <string>
#include <variant>
#include <vector>

#include "anthracnose/model.hpp"

namespace anthracnose {

/// Quadratic severity index in temperature and wetness.
struct AsiCoefficients {
  double a0 = 0.0, a01 = 0.0, a10 = 0.0, a11 = 0.0, a02 = 0.0, a20 = 0.0;
  void validate() const;
};

/// a0 + a01 W + a10 T + a11 T W + a02 T^2 + a20 W^2. The squared terms
/// pair a02 with T and a20 with W, which reads transposed against the usual
/// index convention; kept that way on purpose.
double eval_asi(const AsiCoefficients& c, double T, double W);

/// Logistic model of the fraction of spores producing pigmented appressoria.
struct DoddCoefficients {
  double a0 = 0.0, a01 = 0.0, a10 = 0.0, a02 = 0.0, a20 = 0.0, b = 0.0;
  void validate() const;
};

/// a0 + a01 H + a10 T + a02 H^2 + a20 T^2 + b ln t. Throws DomainError for t <= 0.
double dodd_logit(const DoddCoefficients& c, double T, double H, double t);
/// 1 / (1 + exp(-logit)), in (0, 1).
double eval_dodd_fraction(const DoddCoefficients& c, double T, double H, double t);

enum class DuthieForm { form1, form2 };

/// Temperature-wetness response surface. The temperature location parameter
/// (written f in the literature, which clashes with the function f(T)) is t_mid.
struct DuthieCoefficients {
  double a = 1.0, b = 1.0, c = 0.0, d = 1.0, e = 1.0, t_mid = 0.0, g = 1.0, h = 1.0;
  DuthieForm form = DuthieForm::form1;
  void validate() const;
};

/// e (1+h) h^{h/(1+h)} exp(g (T - t_mid) / (1+h)) / (1 + exp(g (T - t_mid))).
double duthie_temperature_factor(const DuthieCoefficients& c, double T);

/// form1: f(T) [1 - exp(-[b (W - c)]^d)];  form2: a [1 - exp(-[f(T) (W - c)]^d)].
/// Throws DomainError when W < c.
double eval_duthie_response(const DuthieCoefficients& c, double T, double W);

/// Weather samples (t, T, W, H), linearly interpolated and held constant
/// outside the sampled range.
struct WeatherSeries {
  std::vector<double> t, T, W, H;

  struct Sample {
    double T, W, H;
  };
  Sample at(double time) const;
  void validate() const;
};

/// Reads a CSV with columns t, T, W, H (in any order).
WeatherSeries read_weather_csv(const std::string& path);

struct DoddModel {
  DoddCoefficients coefficients;
  double incubation = 1.0;  ///< incubation period fed to the b ln t term
};

using SeverityModel = std::variant<AsiCoefficients, DoddModel, DuthieCoefficients>;

double eval_severity(const SeverityModel& model, const WeatherSeries::Sample& w);

/// alpha(t) = scale * model(weather(t)). Negative values raise DomainError at
/// evaluation time, since the inhibition rate needs alpha >= 0.
Forcing severity_forcing(SeverityModel model, WeatherSeries weather, double scale);

}  // namespace anthracnose
