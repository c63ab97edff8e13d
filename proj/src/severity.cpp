#include "anthracnose/severity.hpp"

#include <algorithm>
#include <cmath>

#include "anthracnose/csv.hpp"
#include "anthracnose/errors.hpp"

namespace anthracnose {

namespace {

void require_finite(std::initializer_list<double> values, const char* what) {
  for (double v : values)
    if (!std::isfinite(v)) throw DomainError(std::string(what) + ": coefficients must be finite");
}

}  // namespace

void AsiCoefficients::validate() const { require_finite({a0, a01, a10, a11, a02, a20}, "ASI"); }

double eval_asi(const AsiCoefficients& c, double T, double W) {
  return c.a0 + c.a01 * W + c.a10 * T + c.a11 * T * W + c.a02 * T * T + c.a20 * W * W;
}

void DoddCoefficients::validate() const { require_finite({a0, a01, a10, a02, a20, b}, "Dodd"); }

double dodd_logit(const DoddCoefficients& c, double T, double H, double t) {
  if (!(t > 0.0)) throw DomainError("Dodd model: incubation period must be positive");
  return c.a0 + c.a01 * H + c.a10 * T + c.a02 * H * H + c.a20 * T * T + c.b * std::log(t);
}

double eval_dodd_fraction(const DoddCoefficients& c, double T, double H, double t) {
  const double z = dodd_logit(c, T, H, t);
  // Branches keep exp from overflowing for large |z|.
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void DuthieCoefficients::validate() const {
  require_finite({a, b, c, d, e, t_mid, g, h}, "Duthie");
  if (!(a > 0 && b > 0 && c >= 0 && d > 0 && e > 0 && t_mid >= 0 && g > 0 && h > 0))
    throw DomainError(
        "Duthie: need a>0, b>0, c>=0, d>0, e>0, f>=0, g>0, h>0 (f is the temperature location)");
}

double duthie_temperature_factor(const DuthieCoefficients& c, double T) {
  const double z = c.g * (T - c.t_mid);
  const double scale = c.e * (1.0 + c.h) * std::pow(c.h, c.h / (1.0 + c.h));
  // exp(z/(1+h)) / (1 + exp(z)) rewritten for large positive z.
  if (z > 0.0) return scale * std::exp(z / (1.0 + c.h) - z) / (std::exp(-z) + 1.0);
  return scale * std::exp(z / (1.0 + c.h)) / (1.0 + std::exp(z));
}

double eval_duthie_response(const DuthieCoefficients& c, double T, double W) {
  if (W < c.c) throw DomainError("Duthie: wetness W must be >= c");
  const double fT = duthie_temperature_factor(c, T);
  if (c.form == DuthieForm::form1) return fT * (1.0 - std::exp(-std::pow(c.b * (W - c.c), c.d)));
  return c.a * (1.0 - std::exp(-std::pow(fT * (W - c.c), c.d)));
}

void WeatherSeries::validate() const {
  if (t.empty()) throw ConfigError("weather series is empty");
  if (T.size() != t.size() || W.size() != t.size() || H.size() != t.size())
    throw ConfigError("weather columns have different lengths");
  for (std::size_t i = 1; i < t.size(); ++i)
    if (!(t[i] > t[i - 1])) throw ConfigError("weather times must be strictly increasing");
}

WeatherSeries::Sample WeatherSeries::at(double time) const {
  if (time <= t.front()) return {T.front(), W.front(), H.front()};
  if (time >= t.back()) return {T.back(), W.back(), H.back()};
  const auto hi = static_cast<std::size_t>(std::upper_bound(t.begin(), t.end(), time) - t.begin());
  const std::size_t lo = hi - 1;
  const double w = (time - t[lo]) / (t[hi] - t[lo]);
  auto lerp = [&](const std::vector<double>& v) { return (1.0 - w) * v[lo] + w * v[hi]; };
  return {lerp(T), lerp(W), lerp(H)};
}

WeatherSeries read_weather_csv(const std::string& path) {
  const CsvTable table = read_csv(path);
  const int ct = table.column("t"), cT = table.column("T"), cW = table.column("W"),
            cH = table.column("H");
  if (ct < 0 || cT < 0 || cW < 0 || cH < 0)
    throw ConfigError(path + ": weather CSV needs columns t, T, W, H");
  WeatherSeries w;
  for (const auto& r : table.rows) {
    w.t.push_back(r[ct]);
    w.T.push_back(r[cT]);
    w.W.push_back(r[cW]);
    w.H.push_back(r[cH]);
  }
  w.validate();
  return w;
}

double eval_severity(const SeverityModel& model, const WeatherSeries::Sample& w) {
  if (const auto* asi = std::get_if<AsiCoefficients>(&model)) return eval_asi(*asi, w.T, w.W);
  if (const auto* dodd = std::get_if<DoddModel>(&model))
    return eval_dodd_fraction(dodd->coefficients, w.T, w.H, dodd->incubation);
  return eval_duthie_response(std::get<DuthieCoefficients>(model), w.T, w.W);
}

Forcing severity_forcing(SeverityModel model, WeatherSeries weather, double scale) {
  weather.validate();
  if (!(scale >= 0.0) || !std::isfinite(scale)) throw DomainError("severity scale must be finite and >= 0");
  return Forcing::of_time([model = std::move(model), weather = std::move(weather), scale](double t) {
    const double a = scale * eval_severity(model, weather.at(t));
    if (!(a >= 0.0)) throw DomainError("severity forcing produced a negative alpha");
    return a;
  });
}

}  // namespace anthracnose
