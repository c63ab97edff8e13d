#include "anthracnose/scenario.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "anthracnose/csv.hpp"
#include "anthracnose/errors.hpp"

namespace anthracnose {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::simulate_ode: return "simulate-ode";
    case Mode::optimize_ode: return "optimize-ode";
    case Mode::simulate_pde: return "simulate-pde";
    case Mode::riccati_pde: return "riccati-pde";
    case Mode::sweep_pde: return "sweep-pde";
    case Mode::forecast: return "forecast";
  }
  return "?";
}

namespace {

// ---------------------------------------------------------------- parsing

// Object reader that remembers which keys were consumed so unknown keys can
// be reported with their full path.
class Obj {
 public:
  Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  double num(const std::string& key, double fallback) {
    return has(key) ? num(key) : (seen_.insert(key), fallback);
  }
  double num(const std::string& key) {
    const json& v = get(key);
    if (!v.is_number()) throw ConfigError(at(key) + ": expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError(at(key) + ": must be finite");
    return d;
  }
  int integer(const std::string& key, int fallback) {
    if (!has(key)) return fallback;
    const json& v = get(key);
    if (!v.is_number_integer()) throw ConfigError(at(key) + ": expected an integer");
    return v.get<int>();
  }
  std::string str(const std::string& key, const std::string& fallback) {
    return has(key) ? str(key) : fallback;
  }
  std::string str(const std::string& key) {
    const json& v = get(key);
    if (!v.is_string()) throw ConfigError(at(key) + ": expected a string");
    return v.get<std::string>();
  }
  std::vector<double> numbers(const std::string& key) {
    const json& v = get(key);
    if (!v.is_array()) throw ConfigError(at(key) + ": expected an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) throw ConfigError(at(key) + ": expected an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }
  const json& get(const std::string& key) {
    if (!has(key)) throw ConfigError(at(key) + ": required key is missing");
    seen_.insert(key);
    return j_.at(key);
  }
  Obj sub(const std::string& key) { return Obj(get(key), at(key)); }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) throw ConfigError(at(key) + ": unknown key");
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  std::string where() const { return path_.empty() ? "config" : path_; }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

Mode parse_mode(const std::string& s, const std::string& where) {
  static const std::map<std::string, Mode> modes{
      {"simulate-ode", Mode::simulate_ode}, {"optimize-ode", Mode::optimize_ode},
      {"simulate-pde", Mode::simulate_pde}, {"riccati-pde", Mode::riccati_pde},
      {"sweep-pde", Mode::sweep_pde},       {"forecast", Mode::forecast}};
  auto it = modes.find(s);
  if (it == modes.end())
    throw ConfigError(where + ": unknown mode '" + s +
                      "' (simulate-ode, optimize-ode, simulate-pde, riccati-pde, sweep-pde, forecast)");
  return it->second;
}

SeverityModel parse_severity_model(Obj o) {
  const std::string type = o.str("type");
  SeverityModel model;
  if (type == "asi") {
    AsiCoefficients c;
    c.a0 = o.num("a0", 0.0);
    c.a01 = o.num("a01", 0.0);
    c.a10 = o.num("a10", 0.0);
    c.a11 = o.num("a11", 0.0);
    c.a02 = o.num("a02", 0.0);
    c.a20 = o.num("a20", 0.0);
    model = c;
  } else if (type == "dodd") {
    DoddModel d;
    d.coefficients.a0 = o.num("a0", 0.0);
    d.coefficients.a01 = o.num("a01", 0.0);
    d.coefficients.a10 = o.num("a10", 0.0);
    d.coefficients.a02 = o.num("a02", 0.0);
    d.coefficients.a20 = o.num("a20", 0.0);
    d.coefficients.b = o.num("b", 0.0);
    d.incubation = o.num("incubation", 1.0);
    require(d.incubation > 0.0, o.at("incubation") + ": must be > 0");
    model = d;
  } else if (type == "duthie") {
    DuthieCoefficients c;
    c.a = o.num("a", 1.0);
    c.b = o.num("b", 1.0);
    c.c = o.num("c", 0.0);
    c.d = o.num("d", 1.0);
    c.e = o.num("e", 1.0);
    c.t_mid = o.num("f", 0.0);  // temperature location
    c.g = o.num("g", 1.0);
    c.h = o.num("h", 1.0);
    const int form = o.integer("form", 1);
    require(form == 1 || form == 2, o.at("form") + ": must be 1 or 2");
    c.form = form == 1 ? DuthieForm::form1 : DuthieForm::form2;
    try {
      c.validate();
    } catch (const DomainError& e) {
      throw ConfigError(o.where() + ": " + e.what());
    }
    model = c;
  } else {
    throw ConfigError(o.at("type") + ": unknown severity model '" + type + "' (asi, dodd, duthie)");
  }
  o.finish();
  return model;
}

AlphaSpec parse_alpha(Obj o, const std::string& base_dir) {
  AlphaSpec a;
  const std::string kind = o.str("kind");
  if (kind == "constant") {
    a.kind = AlphaSpec::Kind::constant;
    a.value = o.num("value");
    require(a.value >= 0.0, o.at("value") + ": alpha must be >= 0");
  } else if (kind == "seasonal") {
    a.kind = AlphaSpec::Kind::seasonal;
    a.seasonal = {o.num("a"), o.num("b"), o.num("c")};
    try {
      a.seasonal.validate();
    } catch (const DomainError& e) {
      throw ConfigError(o.where() + ": " + e.what());
    }
  } else if (kind == "severity") {
    a.kind = AlphaSpec::Kind::severity;
    a.severity = parse_severity_model(o.sub("model"));
    const fs::path w = o.str("weather");
    a.weather_path = (w.is_absolute() ? w : fs::path(base_dir) / w).string();
    a.scale = o.num("scale", 1.0);
    require(a.scale >= 0.0, o.at("scale") + ": must be >= 0");
  } else {
    throw ConfigError(o.at("kind") + ": unknown alpha kind '" + kind + "' (constant, seasonal, severity)");
  }
  o.finish();
  return a;
}

FieldSpec parse_field(Obj o) {
  FieldSpec f;
  const std::string kind = o.str("kind");
  if (kind == "constant") {
    f.kind = FieldSpec::Kind::constant;
    f.value = o.num("value");
  } else if (kind == "random") {
    f.kind = FieldSpec::Kind::random;
    f.low = o.num("low");
    f.high = o.num("high");
    require(f.low <= f.high, o.where() + ": need low <= high");
  } else if (kind == "bump") {
    f.kind = FieldSpec::Kind::bump;
    f.base = o.num("base");
    f.peak = o.num("peak");
    f.width = o.num("width");
    require(f.width > 0.0, o.at("width") + ": must be > 0");
    if (o.has("center")) {
      const auto c = o.numbers("center");
      require(c.size() == 1 || c.size() == 2, o.at("center") + ": expected 1 or 2 coordinates");
      f.center = {c[0], c.size() == 2 ? c[1] : 0.5};
    }
  } else {
    throw ConfigError(o.at("kind") + ": unknown field kind '" + kind + "' (constant, random, bump)");
  }
  o.finish();
  return f;
}

FieldSpec constant_field(double v) {
  FieldSpec f;
  f.value = v;
  return f;
}

// Range check over every value the recipe can produce.
void require_field_range(const FieldSpec& f, double lo, double hi, const std::string& where) {
  double fmin = 0.0, fmax = 0.0;
  switch (f.kind) {
    case FieldSpec::Kind::constant: fmin = fmax = f.value; break;
    case FieldSpec::Kind::random: fmin = f.low; fmax = f.high; break;
    case FieldSpec::Kind::bump:
      fmin = std::min(f.base, f.base + f.peak);
      fmax = std::max(f.base, f.base + f.peak);
      break;
  }
  std::ostringstream os;
  os << where << ": values must lie in [" << lo << ", " << hi << "]";
  require(fmin >= lo && fmax <= hi, os.str());
}

bool is_ode_mode(Mode m) {
  return m == Mode::simulate_ode || m == Mode::optimize_ode || m == Mode::forecast;
}

}  // namespace

ScenarioConfig parse_config(const json& j, const std::string& base_dir) {
  Obj root(j, "");
  ScenarioConfig c;
  c.name = root.str("name", "scenario");
  require(!c.name.empty() && c.name.find_first_of("/\\") == std::string::npos,
          "name: must be a non-empty file-name-safe string");
  c.mode = parse_mode(root.str("mode"), "mode");
  c.T = root.num("T", 1.0);
  c.dt = root.num("dt", 1e-3);
  require(c.T > 0.0, "T: must be > 0");
  require(c.dt > 0.0, "dt: must be > 0");
  require(c.dt <= c.T, "dt: must not exceed T");
  if (root.has("seed")) {
    const json& s = root.get("seed");
    require(s.is_number_unsigned() || (s.is_number_integer() && s.get<long long>() >= 0),
            "seed: expected a nonnegative integer");
    c.seed = s.get<std::uint64_t>();
  }
  if (root.has("output")) c.output = root.str("output");

  if (root.has("model")) {
    Obj m = root.sub("model");
    c.theta1 = m.num("theta1", c.theta1);
    c.theta2 = m.num("theta2", c.theta2);
    c.v_max = m.num("v_max", c.v_max);
    c.beta0 = m.num("beta0", c.beta0);
    c.gamma0 = m.num("gamma0", c.gamma0);
    if (m.has("alpha")) c.alpha = parse_alpha(m.sub("alpha"), base_dir);
    m.finish();
  }
  require(c.theta1 >= 0.0 && c.theta1 < 1.0, "model.theta1: must lie in [0,1)");
  require(c.theta2 > 0.0 && c.theta2 <= 1.0, "model.theta2: must lie in (0,1]");
  require(c.v_max > 0.0, "model.v_max: must be > 0");
  require(c.beta0 >= 0.0, "model.beta0: must be >= 0");
  require(c.gamma0 >= 0.0, "model.gamma0: must be >= 0");
  const bool controls = c.mode == Mode::optimize_ode || c.mode == Mode::riccati_pde ||
                        c.mode == Mode::sweep_pde;
  if (controls) require(c.theta1 > 0.0, "model.theta1: optimal control needs theta1 in (0,1)");
  if (c.mode == Mode::forecast)
    require(c.alpha.kind == AlphaSpec::Kind::severity, "model.alpha: forecast mode needs kind 'severity'");

  if (root.has("initial")) {
    Obj o = root.sub("initial");
    c.initial.theta = o.num("theta", c.initial.theta);
    c.initial.v = o.num("v", c.initial.v);
    c.initial.v_r = o.num("v_r", c.initial.v_r);
    o.finish();
  }
  if (is_ode_mode(c.mode)) {
    const ModelParams p = ModelParams::with_defaults(c.theta1, c.theta2, c.v_max, Forcing(0.0),
                                                     c.beta0, c.gamma0);
    const RegionReport r = check_region(c.initial, p);
    if (!r.in_BS) {
      std::string list;
      for (const auto& v : r.violated_constraints) list += (list.empty() ? "" : ", ") + v;
      throw ConfigError("initial: state must satisfy 0 <= theta < 1, 0 < v <= v_max, 0 <= v_r <= v (violated: " +
                        list + ")");
    }
  }

  if (root.has("cost")) {
    Obj o = root.sub("cost");
    c.k = o.num("k", c.k);
    const std::string t = o.str("terminal", "linear");
    if (t == "linear")
      c.terminal = ScenarioConfig::Terminal::linear;
    else if (t == "quadratic")
      c.terminal = ScenarioConfig::Terminal::quadratic;
    else if (t == "none")
      c.terminal = ScenarioConfig::Terminal::none;
    else
      throw ConfigError("cost.terminal: expected linear, quadratic or none");
    c.terminal_weight = o.num("terminal_weight", c.terminal_weight);
    o.finish();
  }
  require(c.k > 0.0, "cost.k: must be > 0");

  if (root.has("control")) {
    Obj o = root.sub("control");
    const std::string kind = o.str("kind");
    if (kind == "constant") {
      c.control.kind = ControlSpec::Kind::constant;
      c.control.value = o.num("value");
      require(c.control.value >= 0.0 && c.control.value <= 1.0, "control.value: must lie in [0,1]");
    } else if (kind == "series") {
      c.control.kind = ControlSpec::Kind::series;
      c.control.times = o.numbers("times");
      c.control.values = o.numbers("values");
      try {
        ControlSignal(c.control.times, c.control.values);
      } catch (const DomainError& e) {
        throw ConfigError(std::string("control: ") + e.what());
      }
    } else if (kind == "random") {
      c.control.kind = ControlSpec::Kind::random;
      c.control.knots = o.integer("knots", c.control.knots);
      require(c.control.knots >= 2, "control.knots: must be >= 2");
    } else {
      throw ConfigError("control.kind: expected constant, series or random");
    }
    o.finish();
  }

  if (root.has("shooting")) {
    Obj o = root.sub("shooting");
    c.shooting.tol = o.num("tol", c.shooting.tol);
    c.shooting.max_iter = o.integer("max_iter", c.shooting.max_iter);
    c.shooting.guess0 = o.num("guess0", c.shooting.guess0);
    c.shooting.guess1 = o.num("guess1", c.shooting.guess1);
    require(c.shooting.tol > 0.0, "shooting.tol: must be > 0");
    require(c.shooting.max_iter >= 1, "shooting.max_iter: must be >= 1");
    require(c.shooting.guess0 != c.shooting.guess1, "shooting: guess0 and guess1 must differ");
    o.finish();
  }

  if (root.has("grid")) {
    Obj o = root.sub("grid");
    c.grid.dimension = o.integer("dimension", 1);
    require(c.grid.dimension == 1 || c.grid.dimension == 2, "grid.dimension: must be 1 or 2");
    const auto ext = o.numbers("extents");
    const std::vector<double> res = o.numbers("resolution");
    require(static_cast<int>(ext.size()) == c.grid.dimension, "grid.extents: one entry per axis");
    require(static_cast<int>(res.size()) == c.grid.dimension, "grid.resolution: one entry per axis");
    for (int d = 0; d < c.grid.dimension; ++d) {
      require(ext[d] > 0.0, "grid.extents: must be > 0");
      require(res[d] >= 1 && res[d] == std::floor(res[d]), "grid.resolution: positive integers");
      c.grid.extents[d] = ext[d];
      c.grid.resolution[d] = static_cast<int>(res[d]);
    }
    if (c.grid.dimension == 1) c.grid.resolution[1] = 1;
    const bool single = c.grid.dimension == 1 && c.grid.resolution[0] == 1;
    require(single || c.grid.resolution[0] >= 2, "grid.resolution: need >= 2 cells per axis (or 1 in 1D)");
    if (c.grid.dimension == 2)
      require(c.grid.resolution[0] >= 2 && c.grid.resolution[1] >= 2, "grid.resolution: need >= 2 cells per axis");
    if (o.has("diffusion")) {
      const json& d = o.get("diffusion");
      if (d.is_number()) {
        c.diffusion = isotropic(d.get<double>());
      } else if (d.is_array() && d.size() == 2 && d[0].is_number()) {
        c.diffusion = diagonal(d[0].get<double>(), d[1].get<double>());
      } else if (d.is_array() && d.size() == 2 && d[0].is_array()) {
        for (int r = 0; r < 2; ++r)
          for (int s = 0; s < 2; ++s) c.diffusion(r, s) = d.at(r).at(s).get<double>();
      } else {
        throw ConfigError("grid.diffusion: expected a number, [dx, dy] or [[a, b], [c, d]]");
      }
      try {
        build_grid({c.grid.dimension, {1.0, 1.0}, {2, 2}}, c.diffusion);
      } catch (const DomainError& e) {
        throw ConfigError(std::string("grid.diffusion: ") + e.what());
      }
    }
    o.finish();
  } else if (!is_ode_mode(c.mode)) {
    throw ConfigError("grid: required for mode " + to_string(c.mode));
  }

  c.theta0_field = constant_field(0.2);
  c.u_field = constant_field(0.0);
  c.alpha_profile = constant_field(1.0);
  if (root.has("pde")) {
    Obj o = root.sub("pde");
    if (o.has("theta0")) c.theta0_field = parse_field(o.sub("theta0"));
    if (o.has("u")) c.u_field = parse_field(o.sub("u"));
    if (o.has("alpha_profile")) c.alpha_profile = parse_field(o.sub("alpha_profile"));
    c.record_every = o.integer("record_every", c.record_every);
    c.snapshots = o.integer("snapshots", c.snapshots);
    require(c.record_every >= 1, "pde.record_every: must be >= 1");
    require(c.snapshots >= 1, "pde.snapshots: must be >= 1");
    o.finish();
  }
  require_field_range(c.theta0_field, 0.0, 1.0, "pde.theta0");
  require_field_range(c.u_field, 0.0, 1.0, "pde.u");
  require_field_range(c.alpha_profile, 0.0, 1e300, "pde.alpha_profile");

  if (root.has("pde_cost")) {
    Obj o = root.sub("pde_cost");
    c.k1 = o.num("k1", c.k1);
    c.k2 = o.num("k2", c.k2);
    o.finish();
  }
  require(c.k1 > 0.0, "pde_cost.k1: must be > 0");
  require(c.k2 >= 0.0, "pde_cost.k2: must be >= 0");

  if (root.has("riccati")) {
    Obj o = root.sub("riccati");
    c.epsilon = o.num("epsilon", c.epsilon);
    o.finish();
  }
  require(c.epsilon > 0.0, "riccati.epsilon: must be > 0 (eps = 0 is not controllable)");
  if (c.mode == Mode::riccati_pde)
    require(c.grid.resolution[0] * c.grid.resolution[1] <= 256, "grid: riccati-pde is limited to 256 cells");

  if (root.has("sweep")) {
    Obj o = root.sub("sweep");
    c.sweep.relax = o.num("relax", c.sweep.relax);
    c.sweep.max_iter = o.integer("max_iter", c.sweep.max_iter);
    c.sweep.tol = o.num("tol", c.sweep.tol);
    require(c.sweep.relax > 0.0 && c.sweep.relax <= 1.0, "sweep.relax: must lie in (0,1]");
    require(c.sweep.max_iter >= 1, "sweep.max_iter: must be >= 1");
    require(c.sweep.tol > 0.0, "sweep.tol: must be > 0");
    o.finish();
  }
  root.finish();

  c.echo = j;
  c.echo["seed"] = c.seed;
  return c;
}

// ---------------------------------------------------------------- bundled

namespace {

const std::map<std::string, std::string>& bundled() {
  static const std::map<std::string, std::string> table = [] {
    const std::string seasonal = R"({"kind": "seasonal", "a": 4, "b": 0.75, "c": 0.2})";
    auto figure = [&](const std::string& name, double theta0) {
      std::ostringstream os;
      os << R"({"name": ")" << name << R"(", "mode": "optimize-ode", "T": 1, "dt": 0.001,
  "model": {"theta1": 0.6, "theta2": 1, "v_max": 1, "alpha": )" << seasonal << R"(},
  "initial": {"theta": )" << theta0 << R"(, "v": 0.1, "v_r": 0},
  "cost": {"k": 1, "terminal": "linear", "terminal_weight": 1}})";
      return os.str();
    };
    std::map<std::string, std::string> t;
    t["fig1"] = figure("fig1", 0.2);
    t["fig2"] = figure("fig2", 0.2);
    t["fig3"] = figure("fig3", 0.5);
    t["fig4"] = figure("fig4", 0.5);
    t["pde-1d-demo"] = R"({"name": "pde-1d-demo", "mode": "simulate-pde", "T": 2, "dt": 0.001,
  "model": {"theta1": 0.6, "alpha": {"kind": "constant", "value": 1}},
  "grid": {"dimension": 1, "extents": [1], "resolution": [64], "diffusion": 0.01},
  "pde": {"theta0": {"kind": "bump", "base": 0.1, "peak": 0.6, "width": 0.08, "center": [0.3]},
          "u": {"kind": "constant", "value": 0.5}, "record_every": 50, "snapshots": 5},
  "pde_cost": {"k1": 1, "k2": 0}})";
    t["riccati-scalar"] = R"({"name": "riccati-scalar", "mode": "riccati-pde", "T": 1, "dt": 0.001,
  "model": {"theta1": 0.6, "alpha": {"kind": "constant", "value": 2}},
  "grid": {"dimension": 1, "extents": [1], "resolution": [1]},
  "pde": {"theta0": {"kind": "constant", "value": 0.3}, "record_every": 10, "snapshots": 3},
  "pde_cost": {"k1": 1, "k2": 0.5},
  "riccati": {"epsilon": 2}})";
    t["sweep-1d"] = R"({"name": "sweep-1d", "mode": "sweep-pde", "T": 1, "dt": 0.01,
  "model": {"theta1": 0.6, "alpha": )" + seasonal + R"(},
  "grid": {"dimension": 1, "extents": [1], "resolution": [32], "diffusion": 0.01},
  "pde": {"theta0": {"kind": "bump", "base": 0.2, "peak": 0.3, "width": 0.1, "center": [0.5]},
          "alpha_profile": {"kind": "bump", "base": 0.5, "peak": 1, "width": 0.15, "center": [0.3]},
          "record_every": 5, "snapshots": 5},
  "pde_cost": {"k1": 4, "k2": 0.5},
  "sweep": {"relax": 0.5, "max_iter": 300, "tol": 1e-6}})";
    return t;
  }();
  return table;
}

}  // namespace

std::vector<std::string> bundled_scenario_names() {
  std::vector<std::string> names;
  for (const auto& [name, text] : bundled()) names.push_back(name);
  return names;
}

std::string bundled_scenario(const std::string& name) {
  auto it = bundled().find(name);
  if (it == bundled().end()) throw ConfigError("unknown bundled scenario '" + name + "'");
  return it->second;
}

ScenarioConfig load_config(const std::string& path_or_name) {
  const fs::path path(path_or_name);
  std::error_code ec;
  if (!fs::exists(path, ec)) {
    if (bundled().count(path_or_name)) return parse_config(json::parse(bundled_scenario(path_or_name)));
    throw IoError("no such config file or bundled scenario: " + path_or_name);
  }
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path_or_name);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path_or_name + ": invalid JSON: " + e.what());
  }
  const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  return parse_config(j, dir.string());
}

std::string resolve_output_dir(const ScenarioConfig& config, const std::optional<std::string>& cli_out) {
  if (cli_out) return *cli_out;
  if (config.output) return *config.output;
  if (const char* env = std::getenv("ANTHRACNOSE_OUT"); env && *env)
    return (fs::path(env) / config.name).string();
  return (fs::path("out") / config.name).string();
}

json RunReport::to_json() const {
  return {{"name", name},
          {"mode", to_string(mode)},
          {"scenario", scenario},
          {"costs", {{"controlled", costs.controlled}, {"u0", costs.zero}, {"u1", costs.one}}},
          {"diagnostics", diagnostics},
          {"files", files},
          {"converged", converged}};
}

// ---------------------------------------------------------------- execution

namespace {

Forcing make_alpha(const AlphaSpec& a) {
  switch (a.kind) {
    case AlphaSpec::Kind::constant: return Forcing(a.value);
    case AlphaSpec::Kind::seasonal: {
      const SeasonalForcing s = a.seasonal;
      return Forcing::of_time([s](double t) { return seasonal_alpha(s, t); });
    }
    case AlphaSpec::Kind::severity:
      return severity_forcing(*a.severity, read_weather_csv(a.weather_path), a.scale);
  }
  return Forcing(0.0);
}

ModelParams make_params(const ScenarioConfig& c) {
  return ModelParams::with_defaults(c.theta1, c.theta2, c.v_max, make_alpha(c.alpha), c.beta0, c.gamma0);
}

CostSpec make_cost(const ScenarioConfig& c) {
  switch (c.terminal) {
    case ScenarioConfig::Terminal::linear: return CostSpec::linear_terminal(c.k, c.terminal_weight);
    case ScenarioConfig::Terminal::quadratic: return CostSpec::quadratic_terminal(c.k, c.terminal_weight);
    case ScenarioConfig::Terminal::none: return CostSpec::no_terminal(c.k);
  }
  return CostSpec::no_terminal(c.k);
}

ControlSignal make_control(const ScenarioConfig& c) {
  switch (c.control.kind) {
    case ControlSpec::Kind::constant: return ControlSignal::constant(c.control.value);
    case ControlSpec::Kind::series: return ControlSignal(c.control.times, c.control.values);
    case ControlSpec::Kind::random: {
      std::mt19937_64 rng(c.seed);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      std::vector<double> t, v;
      for (int i = 0; i < c.control.knots; ++i) {
        t.push_back(c.T * i / (c.control.knots - 1));
        v.push_back(unit(rng));
      }
      return ControlSignal(t, v);
    }
  }
  return ControlSignal::constant(0.0);
}

class Output {
 public:
  explicit Output(std::string dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw IoError("cannot create output directory " + dir_ + ": " + ec.message());
  }
  CsvWriter open(const std::string& file, const std::vector<std::string>& header) {
    files_.push_back(file);
    return CsvWriter((fs::path(dir_) / file).string(), header);
  }
  const std::vector<std::string>& files() const { return files_; }
  const std::string& dir() const { return dir_; }

 private:
  std::string dir_;
  std::vector<std::string> files_;
};

void write_costs(Output& out, const CostTriple& costs, const std::vector<double>& terminal_theta) {
  CsvWriter w = out.open("costs.csv", {"policy", "cost", "theta_T"});
  const char* names[] = {"controlled", "u0", "u1"};
  const double values[] = {costs.controlled, costs.zero, costs.one};
  for (int i = 0; i < 3; ++i)
    w.row(std::vector<std::string>{names[i], format_number(values[i]), format_number(terminal_theta[i])});
  w.close();
}

void write_timeseries(Output& out, const std::vector<double>& t, const std::vector<double>& theta,
                      const Trajectory& traj, const std::vector<double>& u, const std::vector<double>& p) {
  CsvWriter w = out.open("timeseries.csv", {"t", "theta", "v", "v_r", "u", "p"});
  for (std::size_t i = 0; i < t.size(); ++i)
    w.row(std::vector<double>{t[i], theta[i], traj.states[i].v, traj.states[i].v_r, u[i], p[i]});
  w.close();
}

json region_summary(const Trajectory& traj, const ModelParams& p) {
  int outside = 0;
  double first_exit = -1.0;
  std::set<std::string> violated;
  for (std::size_t i = 0; i < traj.states.size(); ++i) {
    const RegionReport r = check_region(traj.states[i], p);
    if (!r.in_BS) {
      if (outside++ == 0) first_exit = traj.times[i];
      violated.insert(r.violated_constraints.begin(), r.violated_constraints.end());
    }
  }
  json j = {{"samples_outside_BS", outside}, {"violated", std::vector<std::string>(violated.begin(), violated.end())}};
  if (outside) j["first_exit_time"] = first_exit;
  return j;
}

RunReport run_ode(const ScenarioConfig& c, Output& out) {
  const ModelParams params = make_params(c);
  params.validate(0.0, c.T);
  const CostSpec cost = make_cost(c);
  RunReport rep;
  const ControlledRun zero = evaluate_control(params, cost, ControlSignal::constant(0.0), c.initial.theta, c.T, c.dt);
  const ControlledRun one = evaluate_control(params, cost, ControlSignal::constant(1.0), c.initial.theta, c.T, c.dt);
  rep.costs.zero = zero.cost;
  rep.costs.one = one.cost;

  if (c.mode == Mode::optimize_ode) {
    const OptimalSolution sol = shoot_p0(c.initial.theta, params, cost, c.T, c.dt, c.shooting);
    const Trajectory traj = integrate_ode(params, sol.control, c.initial, 0.0, c.T, c.dt);
    write_timeseries(out, sol.times, sol.theta, traj, sol.u, sol.adjoint);
    rep.costs.controlled = sol.cost;
    rep.diagnostics = {{"p0", sol.p0},
                       {"terminal_residual", sol.residual},
                       {"shooting_evaluations", sol.iterations},
                       {"theta_T", sol.theta.back()},
                       {"theta_T_u0", zero.theta.back()},
                       {"theta_T_u1", one.theta.back()},
                       {"dominates_constant_policies", sol.cost <= std::min(zero.cost, one.cost)},
                       {"region", region_summary(traj, params)}};
    write_costs(out, rep.costs, {sol.theta.back(), zero.theta.back(), one.theta.back()});
    return rep;
  }

  const ControlSignal control = make_control(c);
  const Trajectory traj = integrate_ode(params, control, c.initial, 0.0, c.T, c.dt);
  const ControlGradient grad = hamiltonian_gradient(params, cost, control, c.initial.theta, c.T, c.dt);
  std::vector<double> theta, u;
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    theta.push_back(traj.states[i].theta);
    u.push_back(control(traj.times[i]));
  }
  write_timeseries(out, traj.times, theta, traj, u, grad.p);
  rep.costs.controlled = grad.cost;
  rep.diagnostics = {{"theta_T", theta.back()},
                     {"v_T", traj.final_state().v},
                     {"v_r_T", traj.final_state().v_r},
                     {"region", region_summary(traj, params)}};

  if (c.mode == Mode::forecast) {
    const WeatherSeries weather = read_weather_csv(c.alpha.weather_path);
    CsvWriter w = out.open("forecast.csv", {"t", "T", "W", "H", "severity", "alpha"});
    for (double t : traj.times) {
      const auto s = weather.at(t);
      w.row(std::vector<double>{t, s.T, s.W, s.H, eval_severity(*c.alpha.severity, s), params.alpha.at(t)});
    }
    w.close();
  }
  write_costs(out, rep.costs, {theta.back(), zero.theta.back(), one.theta.back()});
  return rep;
}

ScalarField make_field(const FieldSpec& f, const SpatialGrid& grid, std::uint64_t seed) {
  const int n = grid.cell_count();
  ScalarField out(n);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(f.low, f.high);
  for (int i = 0; i < n; ++i) {
    switch (f.kind) {
      case FieldSpec::Kind::constant: out(i) = f.value; break;
      case FieldSpec::Kind::random: out(i) = f.low == f.high ? f.low : dist(rng); break;
      case FieldSpec::Kind::bump: {
        const auto x = grid.center(i);
        double r2 = (x[0] - f.center[0]) * (x[0] - f.center[0]);
        if (grid.dimension == 2) r2 += (x[1] - f.center[1]) * (x[1] - f.center[1]);
        out(i) = f.base + f.peak * std::exp(-r2 / (2.0 * f.width * f.width));
        break;
      }
    }
  }
  return out;
}

struct PdeSetup {
  PdeControlProblem problem;
  ScalarField u;
  ScalarField profile;
  Forcing alpha_t{0.0};
};

PdeSetup make_pde(const ScenarioConfig& c) {
  PdeSetup s;
  auto& pb = s.problem;
  std::tie(pb.grid, pb.A) = c.grid.dimension == 1 && c.grid.resolution[0] == 1
                                ? single_cell_grid(c.grid.extents[0])
                                : build_grid(c.grid, c.diffusion);
  // Distinct seeds so random fields are independent of each other.
  pb.theta0 = make_field(c.theta0_field, pb.grid, c.seed);
  s.u = make_field(c.u_field, pb.grid, c.seed + 1);
  s.profile = make_field(c.alpha_profile, pb.grid, c.seed + 2);
  s.alpha_t = make_alpha(c.alpha);
  const Forcing at = s.alpha_t;
  const ScalarField profile = s.profile;
  pb.alpha = [at, profile](double t) -> ScalarField { return at.at(t) * profile; };
  pb.theta1 = c.theta1;
  pb.cost = PdeCostSpec::uniform(pb.grid.cell_count(), c.k1, c.k2);
  pb.T = c.T;
  pb.dt = c.dt;
  return s;
}

std::vector<int> snapshot_indices(int steps, int count) {
  std::vector<int> idx;
  if (count == 1) return {steps};
  for (int k = 0; k < count; ++k) {
    const int i = static_cast<int>(std::lround(static_cast<double>(k) * steps / (count - 1)));
    if (idx.empty() || idx.back() != i) idx.push_back(i);
  }
  return idx;
}

struct NamedPath {
  std::string name;
  const std::vector<ScalarField>* states;
};

void write_fields(Output& out, const ScenarioConfig& c, const SpatialGrid& grid,
                  const std::vector<double>& times, const std::vector<NamedPath>& columns) {
  std::vector<std::string> header{"snapshot", "t", "cell", "x", "y"};
  for (const auto& col : columns) header.push_back(col.name);
  CsvWriter w = out.open("fields.csv", header);
  const int steps = static_cast<int>(times.size()) - 1;
  int snap = 0;
  for (int n : snapshot_indices(steps, c.snapshots)) {
    for (int i = 0; i < grid.cell_count(); ++i) {
      const auto x = grid.center(i);
      std::vector<double> row{static_cast<double>(snap), times[n], static_cast<double>(i), x[0], x[1]};
      for (const auto& col : columns) row.push_back((*col.states)[n](i));
      w.row(row);
    }
    ++snap;
  }
  w.close();

  std::vector<std::string> ph{"t", "cell"};
  for (const auto& col : columns) ph.push_back(col.name);
  CsvWriter p = out.open("paths.csv", ph);
  for (int n = 0; n <= steps; ++n) {
    if (n % c.record_every != 0 && n != steps) continue;
    for (int i = 0; i < grid.cell_count(); ++i) {
      std::vector<double> row{times[n], static_cast<double>(i)};
      for (const auto& col : columns) row.push_back((*col.states)[n](i));
      p.row(row);
    }
  }
  p.close();
}

double mean(const ScalarField& f) { return f.size() ? f.mean() : 0.0; }

RunReport run_pde(const ScenarioConfig& c, Output& out) {
  PdeSetup s = make_pde(c);
  const PdeControlProblem& pb = s.problem;
  pb.validate();
  const double h = pb.step();
  RunReport rep;

  const FieldPath zero = solve_state(pb, constant_control(pb, 0.0));
  const FieldPath one = solve_state(pb, constant_control(pb, 1.0));
  rep.costs.zero = eval_cost_JT3(zero, constant_control(pb, 0.0), pb.cost, pb.grid, h);
  rep.costs.one = eval_cost_JT3(one, constant_control(pb, 1.0), pb.cost, pb.grid, h);
  std::vector<double> terminal{0.0, mean(zero.states.back()), mean(one.states.back())};

  if (c.mode == Mode::simulate_pde) {
    const ControlPath u(pb.steps() + 1, s.u);
    const FieldPath path = solve_state(pb, u);
    rep.costs.controlled = eval_cost_JT3(path, u, pb.cost, pb.grid, h);
    terminal[0] = mean(path.states.back());
    write_fields(out, c, pb.grid, path.times, {{"theta", &path.states}, {"u", &u}});

    const ScalarField alpha0 = pb.alpha(0.0);
    const OperatorMatrix L0 = assemble_operator(pb.grid, pb.A, alpha0, s.u, pb.theta1, Reaction::full);
    const EigenEstimate eig = principal_eigenvalue(L0);
    rep.diagnostics["principal_eigenvalue"] = eig.value;
    rep.diagnostics["asymptotically_stable"] = eig.asymptotically_stable();
    rep.diagnostics["theta_T_mean"] = terminal[0];

    const bool time_constant = c.alpha.kind == AlphaSpec::Kind::constant;
    if (time_constant && (alpha0.array() != 0.0).any()) {
      const ScalarField eq = solve_equilibrium(L0, alpha0);
      CsvWriter w = out.open("equilibrium.csv", {"cell", "x", "y", "theta_star"});
      for (int i = 0; i < pb.grid.cell_count(); ++i) {
        const auto x = pb.grid.center(i);
        w.row(std::vector<double>{static_cast<double>(i), x[0], x[1], eq(i)});
      }
      w.close();
      rep.diagnostics["equilibrium_distance_at_T"] = (path.states.back() - eq).lpNorm<Eigen::Infinity>();
    }
    const bool uniform = (s.u.array() == s.u(0)).all() && (s.profile.array() == s.profile(0)).all();
    if (time_constant && uniform) {
      const BoundsReport k = bound_constants(pb.theta0, s.u, pb.theta1);
      const BoundsReport b = verify_bounds(path, k.rho, alpha0, k.m, k.M);
      rep.diagnostics["bounds"] = {{"m", b.m},
                                   {"M", b.M},
                                   {"worst_lower_slack", b.worst_lower_slack},
                                   {"worst_upper_slack", b.worst_upper_slack},
                                   {"holds", b.holds(1e-8)}};
    }
  } else if (c.mode == Mode::riccati_pde) {
    const LinearizationPoint eps{ScalarField::Constant(pb.grid.cell_count(), c.epsilon)};
    const Linearization lin = linearize(pb.alpha(0.0), eps, pb.theta1, pb.grid, pb.A);
    const RiccatiPath path = integrate_riccati(lin, pb.cost, pb.T, pb.dt);
    const ClosedLoopRun run = simulate_riccati_closed_loop(pb, lin, path, eps);
    rep.costs.controlled = run.cost;
    terminal[0] = mean(run.theta.states.back());
    write_fields(out, c, pb.grid, run.theta.times, {{"theta", &run.theta.states}, {"u", &run.u}});

    CsvWriter w = out.open("riccati.csv", {"t", "trace", "min_eig", "max_eig"});
    double worst_asym = 0.0, min_eig = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < path.samples.size(); ++i) {
      const RiccatiSpectrum sp = riccati_spectrum(path.samples[i].P);
      worst_asym = std::max(worst_asym, sp.asymmetry);
      min_eig = std::min(min_eig, sp.min_eig);
      if (i % c.record_every == 0 || i + 1 == path.samples.size())
        w.row(std::vector<double>{path.samples[i].t, sp.trace, sp.min_eig, sp.max_eig});
    }
    w.close();
    const RegulatorRun reg = simulate_regulator(lin, path, pb.cost, pb.grid, pb.theta0, pb.T, pb.dt);
    rep.diagnostics = {{"clamped_fraction", run.clamped_fraction},
                       {"riccati_min_eig", min_eig},
                       {"riccati_max_asymmetry", worst_asym},
                       {"riccati_trace_T", path.samples.back().P.trace()},
                       {"linearized_regulator_cost", reg.cost},
                       {"linearized_value", pb.grid.cell_volume * pb.theta0.dot(path.samples.back().P * pb.theta0)},
                       {"theta_T_mean", terminal[0]}};
  } else {
    const SweepResult r = forward_backward_sweep(pb, c.sweep);
    rep.costs.controlled = r.cost_history.back();
    rep.converged = r.converged;
    terminal[0] = mean(r.theta.states.back());
    write_fields(out, c, pb.grid, r.theta.times,
                 {{"theta", &r.theta.states}, {"u", &r.u}, {"p", &r.p.states}});
    CsvWriter w = out.open("cost_history.csv", {"iteration", "cost"});
    for (std::size_t i = 0; i < r.cost_history.size(); ++i)
      w.row(std::vector<double>{static_cast<double>(i), r.cost_history[i]});
    w.close();
    rep.diagnostics = {{"iterations", r.iterations},
                       {"final_change", r.final_change},
                       {"converged", r.converged},
                       {"dominates_constant_policies",
                        rep.costs.controlled <= std::min(rep.costs.zero, rep.costs.one) + 1e-6},
                       {"theta_T_mean", terminal[0]}};
  }
  write_costs(out, rep.costs, terminal);
  return rep;
}

}  // namespace

RunReport execute(const ScenarioConfig& config, const std::string& out_dir) {
  Output out(out_dir);
  RunReport rep = is_ode_mode(config.mode) ? run_ode(config, out) : run_pde(config, out);
  rep.name = config.name;
  rep.mode = config.mode;
  rep.scenario = config.echo;
  rep.output_dir = out_dir;
  rep.files = out.files();

  const std::string report_path = (fs::path(out_dir) / "report.json").string();
  std::ofstream f(report_path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + report_path);
  f << rep.to_json().dump(2) << '\n';
  if (!f) throw IoError("write failed for " + report_path);
  return rep;
}

}  // namespace anthracnose
