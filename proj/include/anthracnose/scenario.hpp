#pragma once

// Scenario configs (JSON) and the batch driver that runs one of the solver
// modes and writes CSV outputs plus a report.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "anthracnose/model.hpp"
#include "anthracnose/ode_control.hpp"
#include "anthracnose/pde_control.hpp"
#include "anthracnose/severity.hpp"

namespace anthracnose {

enum class Mode { simulate_ode, optimize_ode, simulate_pde, riccati_pde, sweep_pde, forecast };

std::string to_string(Mode mode);

/// Time part of alpha: constant, seasonal a (t - b)^2 (1 - cos(2 pi t / c)), or a
/// severity model driven by a weather CSV.
struct AlphaSpec {
  enum class Kind { constant, seasonal, severity } kind = Kind::constant;
  double value = 0.0;
  SeasonalForcing seasonal;
  std::optional<SeverityModel> severity;
  std::string weather_path;  ///< resolved against the config file directory
  double scale = 1.0;
};

/// Spatial field recipe: constant, uniform random in [low, high] (seeded), or
/// a Gaussian bump base + peak exp(-|x - center|^2 / (2 width^2)).
struct FieldSpec {
  enum class Kind { constant, random, bump } kind = Kind::constant;
  double value = 0.0;
  double low = 0.0, high = 1.0;
  double base = 0.0, peak = 0.0, width = 0.1;
  std::array<double, 2> center{0.5, 0.5};
};

/// Open-loop ODE control: constant, piecewise-linear series, or seeded random knots.
struct ControlSpec {
  enum class Kind { constant, series, random } kind = Kind::constant;
  double value = 0.0;
  std::vector<double> times, values;
  int knots = 10;
};

struct ScenarioConfig {
  std::string name = "scenario";
  Mode mode = Mode::simulate_ode;
  double T = 1.0;
  double dt = 1e-3;
  std::uint64_t seed = 0;
  std::optional<std::string> output;

  double theta1 = 0.6, theta2 = 1.0, v_max = 1.0, beta0 = 1.0, gamma0 = 1.0;
  AlphaSpec alpha;

  HostState initial{0.2, 0.1, 0.0};
  double k = 1.0;
  enum class Terminal { linear, quadratic, none } terminal = Terminal::linear;
  double terminal_weight = 1.0;
  ControlSpec control;
  ShootingOptions shooting;

  GridSpec grid;
  Tensor diffusion = Tensor::Identity();
  FieldSpec theta0_field, u_field, alpha_profile;
  double k1 = 1.0, k2 = 0.0;
  double epsilon = 1.0;
  SweepOptions sweep;
  int record_every = 10;
  int snapshots = 5;

  nlohmann::json echo;  ///< normalized input, copied into the report
};

/// Parses and validates a config object. base_dir resolves relative paths.
/// Throws ConfigError naming the offending key.
ScenarioConfig parse_config(const nlohmann::json& j, const std::string& base_dir = ".");

/// Loads a config file, or a bundled scenario when no such file exists and
/// the argument names one. IoError for unreadable files, ConfigError otherwise.
ScenarioConfig load_config(const std::string& path_or_name);

std::vector<std::string> bundled_scenario_names();
/// Raw JSON text of a bundled scenario; ConfigError for unknown names.
std::string bundled_scenario(const std::string& name);

struct CostTriple {
  double controlled = 0.0;
  double zero = 0.0;  ///< u = 0
  double one = 0.0;   ///< u = 1
};

struct RunReport {
  std::string name;
  Mode mode = Mode::simulate_ode;
  nlohmann::json scenario;
  CostTriple costs;
  nlohmann::json diagnostics;
  std::vector<std::string> files;  ///< relative to output_dir
  std::string output_dir;
  bool converged = true;

  nlohmann::json to_json() const;
};

/// Runs the scenario and writes outputs into out_dir (created if needed),
/// including report.json. Numerical failures propagate as library errors;
/// a sweep that does not converge still writes its outputs and returns
/// converged = false.
RunReport execute(const ScenarioConfig& config, const std::string& out_dir);

/// --out, then the config's output, then $ANTHRACNOSE_OUT/<name>, then out/<name>.
std::string resolve_output_dir(const ScenarioConfig& config, const std::optional<std::string>& cli_out);

}  // namespace anthracnose
