#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "anthracnose/csv.hpp"
#include "anthracnose/errors.hpp"
#include "anthracnose/scenario.hpp"

using namespace anthracnose;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("anthracnose_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int cli(const std::string& args) {
  const std::string cmd = std::string(ANTHRACNOSE_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string write_config(const fs::path& dir, const json& j) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << j.dump(2);
  return p.string();
}

json simulate_ode() {
  return json::parse(R"({"name": "flat", "mode": "simulate-ode", "T": 1, "dt": 0.01,
    "model": {"theta1": 0.6, "alpha": {"kind": "constant", "value": 0}},
    "initial": {"theta": 0.3, "v": 0.2, "v_r": 0.1},
    "control": {"kind": "constant", "value": 0.5}})");
}

}  // namespace

TEST_CASE("config validation errors name the key") {
  auto message = [](const json& j) -> std::string {
    try {
      parse_config(j);
    } catch (const ConfigError& e) {
      return e.what();
    }
    return "";
  };
  json j = simulate_ode();
  j["model"]["thetal"] = 0.5;
  CHECK(message(j).find("model.thetal: unknown key") != std::string::npos);
  j = simulate_ode();
  j.erase("mode");
  CHECK(message(j).find("mode: required") != std::string::npos);
  j = simulate_ode();
  j["mode"] = "simulate";
  CHECK(message(j).find("unknown mode") != std::string::npos);
  j = simulate_ode();
  j["initial"]["v_r"] = 0.5;
  CHECK(message(j).find("v_r <= v") != std::string::npos);
  j = simulate_ode();
  j["dt"] = 2.0;
  CHECK(message(j).find("dt") != std::string::npos);
  j = simulate_ode();
  j["mode"] = "sweep-pde";
  CHECK(message(j).find("grid") != std::string::npos);
  j = simulate_ode();
  j["mode"] = "forecast";
  CHECK(message(j).find("severity") != std::string::npos);
}

TEST_CASE("bundled scenarios parse") {
  const auto names = bundled_scenario_names();
  CHECK(names.size() == 7);
  for (const auto& n : names) CHECK_NOTHROW(parse_config(json::parse(bundled_scenario(n))));
  CHECK_THROWS_AS(bundled_scenario("nope"), ConfigError);
  CHECK(load_config("fig1").initial.theta == 0.2);
  CHECK(load_config("fig3").initial.theta == 0.5);
}

TEST_CASE("simulate-ode with zero forcing gives a flat series") {
  const fs::path dir = scratch("flat");
  const RunReport rep = execute(parse_config(simulate_ode()), dir.string());
  const CsvTable ts = read_csv((dir / "timeseries.csv").string());
  CHECK(ts.header == std::vector<std::string>{"t", "theta", "v", "v_r", "u", "p"});
  CHECK(ts.rows.size() == 101);
  for (const auto& r : ts.rows) CHECK(r[1] == 0.3);
  for (const auto& f : rep.files) CHECK(fs::exists(dir / f));
  CHECK(fs::exists(dir / "report.json"));
  std::ifstream costs(dir / "costs.csv");
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(costs, line)) lines.push_back(line);
  REQUIRE(lines.size() == 4);
  CHECK(lines[0] == "policy,cost,theta_T");
  CHECK(lines[1].rfind("controlled,", 0) == 0);
  // theta stays at 0.3: int theta^2 + k u^2 = 0.09 + 0.25, plus f(theta(T)) = 0.3.
  CHECK(rep.costs.controlled == doctest::Approx(0.3 * 0.3 + 0.25 + 0.3).epsilon(1e-9));
}

TEST_CASE("fig1 writes its manifest and beats both constant policies") {
  const fs::path dir = scratch("fig1");
  const RunReport rep = execute(load_config("fig1"), dir.string());
  for (const char* f : {"costs.csv", "timeseries.csv", "report.json"}) CHECK(fs::exists(dir / f));
  CHECK(rep.costs.controlled <= rep.costs.zero);
  CHECK(rep.costs.controlled <= rep.costs.one);
  std::ifstream in(dir / "report.json");
  const json j = json::parse(in);
  CHECK(j.at("mode") == "optimize-ode");
  CHECK(j.at("costs").at("controlled").get<double>() == doctest::Approx(rep.costs.controlled));
}

TEST_CASE("forecast reads weather relative to the config file") {
  const fs::path dir = scratch("forecast");
  std::ofstream(dir / "weather.csv") << "t,T,W,H\n0,20,4,85\n1,28,10,95\n";
  const std::string cfg = write_config(dir, json::parse(R"({"name": "fc", "mode": "forecast", "T": 1, "dt": 0.01,
    "model": {"theta1": 0.6, "alpha": {"kind": "severity", "weather": "weather.csv", "scale": 0.1,
              "model": {"type": "asi", "a10": 0.1}}},
    "control": {"kind": "constant", "value": 0.3}})"));
  const ScenarioConfig c = load_config(cfg);
  execute(c, (dir / "out").string());
  const CsvTable fc = read_csv((dir / "out" / "forecast.csv").string());
  CHECK(fc.rows.size() == 101);
  const int alpha = fc.column("alpha"), sev = fc.column("severity");
  REQUIRE(alpha >= 0);
  REQUIRE(sev >= 0);
  for (const auto& r : fc.rows) CHECK(r[alpha] == doctest::Approx(0.1 * r[sev]));
  CHECK(fc.rows.front()[sev] == doctest::Approx(2.0));
  CHECK(fc.rows.back()[sev] == doctest::Approx(2.8));
}

TEST_CASE("output directory precedence") {
  ScenarioConfig c = load_config("fig1");
  CHECK(resolve_output_dir(c, std::string("x")) == "x");
  c.output = "y";
  CHECK(resolve_output_dir(c, std::nullopt) == "y");
}

TEST_CASE("command line exit codes") {
  const fs::path dir = scratch("exit");
  CHECK(cli("list-scenarios") == 0);
  CHECK(cli("validate fig1") == 0);
  CHECK(cli("run " + write_config(dir, simulate_ode()) + " --out " + (dir / "ok").string()) == 0);
  json bad = simulate_ode();
  bad["T"] = -1;
  CHECK(cli("validate " + write_config(dir, bad)) == 2);
  CHECK(cli("validate " + (dir / "missing.json").string()) == 4);
  {
    std::ofstream(dir / "config.json") << "{ not json";
  }
  CHECK(cli("validate " + (dir / "config.json").string()) == 2);
  const std::string blocker = (dir / "file").string();
  std::ofstream(blocker) << "x";
  CHECK(cli("run " + write_config(dir, simulate_ode()) + " --out " + blocker + "/sub") == 4);
  json nan_case = simulate_ode();
  nan_case["mode"] = "optimize-ode";
  nan_case["model"]["alpha"] = json::parse(R"({"kind": "constant", "value": 1})");
  nan_case["shooting"] = json::parse(R"({"max_iter": 1, "tol": 1e-15})");
  CHECK(cli("run " + write_config(dir, nan_case) + " --out " + (dir / "nc").string()) == 3);
  CHECK(cli("batch fig1 riccati-scalar --out-root " + (dir / "batch").string() + " --jobs 2") == 0);
  CHECK(fs::exists(dir / "batch" / "fig1" / "costs.csv"));
  CHECK(fs::exists(dir / "batch" / "riccati-scalar" / "riccati.csv"));
}

TEST_CASE("scenario files match the bundled scenarios") {
  const fs::path dir = ANTHRACNOSE_SCENARIOS;
  int checked = 0;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() != ".json") continue;
    const ScenarioConfig c = load_config(entry.path().string());
    const std::string name = entry.path().stem().string();
    CHECK(c.name == name);
    const auto names = bundled_scenario_names();
    if (std::find(names.begin(), names.end(), name) != names.end()) {
      CHECK(c.echo == parse_config(json::parse(bundled_scenario(name))).echo);
      ++checked;
    }
  }
  CHECK(checked == 7);
}
