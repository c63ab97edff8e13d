// Command-line front end: run, validate, list-scenarios, batch.
//
// Exit codes: 0 ok, 2 config error, 3 numerical failure (including a sweep
// that did not converge), 4 I/O error.

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "anthracnose/csv.hpp"
#include "anthracnose/errors.hpp"
#include "anthracnose/scenario.hpp"

namespace {

using namespace anthracnose;

constexpr int kOk = 0, kConfig = 2, kNumerical = 3, kIo = 4;

std::mutex io_mutex;

void say(std::ostream& os, const std::string& line) {
  std::lock_guard<std::mutex> lock(io_mutex);
  os << line << '\n';
}

int run_one(const std::string& target, const std::optional<std::string>& out,
            const std::optional<std::uint64_t>& seed) {
  try {
    ScenarioConfig cfg = load_config(target);
    if (seed) {
      cfg.seed = *seed;
      cfg.echo["seed"] = *seed;
    }
    const std::string dir = resolve_output_dir(cfg, out);
    const RunReport rep = execute(cfg, dir);
    say(std::cout, rep.name + " [" + to_string(rep.mode) + "] -> " + dir);
    say(std::cout, "  cost controlled=" + format_number(rep.costs.controlled) +
                       " u0=" + format_number(rep.costs.zero) + " u1=" + format_number(rep.costs.one));
    if (!rep.converged) {
      say(std::cerr, rep.name + ": iteration did not converge (outputs written)");
      return kNumerical;
    }
    return kOk;
  } catch (const ConfigError& e) {
    say(std::cerr, target + ": config error: " + e.what());
    return kConfig;
  } catch (const IoError& e) {
    say(std::cerr, target + ": I/O error: " + e.what());
    return kIo;
  } catch (const Error& e) {
    say(std::cerr, target + ": numerical failure: " + e.what());
    return kNumerical;
  } catch (const std::exception& e) {
    say(std::cerr, target + ": numerical failure: " + e.what());
    return kNumerical;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Within-host and spatial anthracnose control models"};
  app.require_subcommand(1);

  std::string target;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  auto* run = app.add_subcommand("run", "Run a config file or bundled scenario");
  run->add_option("config", target, "Config path or bundled scenario name")->required();
  run->add_option("--out", out, "Output directory");
  run->add_option("--seed", seed, "Override the config seed");

  auto* validate = app.add_subcommand("validate", "Parse and validate a config without running it");
  validate->add_option("config", target, "Config path or bundled scenario name")->required();

  app.add_subcommand("list-scenarios", "List bundled scenarios");

  std::vector<std::string> targets;
  std::optional<std::string> out_root;
  unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
  auto* batch = app.add_subcommand("batch", "Run several scenarios in parallel worker threads");
  batch->add_option("configs", targets, "Config paths or bundled names")->required();
  batch->add_option("--out-root", out_root, "Each scenario writes to OUT_ROOT/<name>");
  batch->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfig;
  }

  if (*run) return run_one(target, out, seed);

  if (*validate) {
    try {
      const ScenarioConfig cfg = load_config(target);
      std::cout << cfg.name << ": valid (" << to_string(cfg.mode) << ")\n";
      return kOk;
    } catch (const IoError& e) {
      std::cerr << target << ": I/O error: " << e.what() << '\n';
      return kIo;
    } catch (const std::exception& e) {
      std::cerr << target << ": config error: " << e.what() << '\n';
      return kConfig;
    }
  }

  if (app.got_subcommand("list-scenarios")) {
    for (const auto& name : bundled_scenario_names()) std::cout << name << '\n';
    return kOk;
  }

  // batch
  std::vector<int> codes(targets.size(), kOk);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < targets.size(); i = next++) {
      std::optional<std::string> dir;
      if (out_root) {
        try {
          dir = *out_root + "/" + load_config(targets[i]).name;
        } catch (...) {
          // run_one reports the error.
        }
      }
      codes[i] = run_one(targets[i], dir, std::nullopt);
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < std::min<std::size_t>(jobs, targets.size()); ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  return *std::max_element(codes.begin(), codes.end());
}
