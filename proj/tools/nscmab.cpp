#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "nscmab/harness.hpp"

using nlohmann::json;

namespace {

enum Exit { ok = 0, validation = 1, runtime = 2 };

// "auto" stays a string; anything else must be an integer.
json auto_or_int(const std::string& s, const std::string& flag) {
  if (s == "auto") return s;
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(s, &pos);
    if (pos == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw nscmab::ValidationError({flag + ": must be an integer or \"auto\", got '" + s + "'"});
}

struct RunFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<long long> T;
  std::optional<std::string> algo, window, measure, mode, L;
  std::optional<double> delta;
};

json apply_flags(json doc, const RunFlags& f) {
  if (f.T) {
    doc["T"] = *f.T;
    if (doc.contains("env") && doc["env"].is_object()) doc["env"].erase("horizon");
  }
  if (f.algo && (!doc.contains("algo") || doc["algo"].value("name", "") != *f.algo))
    doc["algo"] = {{"name", *f.algo}};
  if (f.window) doc["algo"]["window"] = auto_or_int(*f.window, "--window");
  if (f.measure) doc["algo"]["measure"] = *f.measure;
  if (f.mode) doc["algo"]["mode"] = *f.mode;
  if (f.L) doc["algo"]["L"] = auto_or_int(*f.L, "--L");
  if (f.delta) doc["algo"]["delta"] = *f.delta;
  if (f.seed) doc["seeds"] = json::array({*f.seed});
  if (f.out) doc["out_dir"] = *f.out;
  return doc;
}

int cmd_run(const RunFlags& f) {
  const auto cfg = nscmab::parse_config(apply_flags(nscmab::read_json_file(f.config), f));
  const auto summary = nscmab::run(cfg);
  json brief{{"config_hash", summary["config_hash"]},
             {"out_dir", cfg.out_dir},
             {"final_regret_mean", summary["final_regret_mean"]},
             {"final_regret_std", summary["final_regret_std"]},
             {"resolved", summary["resolved"]}};
  std::cout << brief.dump(2) << "\n";
  return ok;
}

int cmd_sweep(const std::string& path, int jobs) {
  const auto grid = nscmab::SweepGrid::from_json(nscmab::read_json_file(path));
  const auto results = nscmab::sweep(grid, jobs);
  nscmab::write_atomic(std::filesystem::path(grid.out_dir) / "aggregate.csv", nscmab::aggregate_csv(grid, results));
  int code = ok;
  std::size_t good = 0;
  for (const auto& r : results) {
    if (r.status == "ok" || r.status == "resumed") {
      ++good;
    } else {
      std::cerr << "cell " << r.hash << " " << r.status << ": " << r.message << "\n";
      code = std::max(code, r.status == "invalid" ? static_cast<int>(validation) : static_cast<int>(runtime));
    }
  }
  std::cout << good << "/" << results.size() << " cells ok, aggregate at "
            << (std::filesystem::path(grid.out_dir) / "aggregate.csv").string() << "\n";
  return code;
}

int cmd_measures(const std::string& path) {
  const auto cfg = nscmab::parse_config(nscmab::read_json_file(path));
  std::cout << nscmab::measures_report(cfg).dump(2) << "\n";
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Non-stationary combinatorial semi-bandit simulator"};
  app.require_subcommand(1);

  RunFlags rf;
  auto* run = app.add_subcommand("run", "Run one configuration over its seeds");
  run->add_option("--config", rf.config, "Config JSON")->required();
  run->add_option("--seed-override", rf.seed, "Run this single seed instead of the listed ones");
  run->add_option("--out", rf.out, "Output directory");
  run->add_option("--T", rf.T, "Horizon");
  run->add_option("--algo", rf.algo, "cucb_sw, cucb_bob or ada_lcmab");
  run->add_option("--window", rf.window, "CUCB-SW window, integer or auto");
  run->add_option("--measure", rf.measure, "Measure for auto window: S or V");
  run->add_option("--mode", rf.mode, "dep or indep");
  run->add_option("--L", rf.L, "BoB block length, integer or auto");
  run->add_option("--delta", rf.delta, "Ada-LCMAB confidence");

  std::string grid_path;
  int jobs = 1;
  auto* sw = app.add_subcommand("sweep", "Run a grid of configurations");
  sw->add_option("--grid", grid_path, "Grid JSON")->required();
  sw->add_option("--jobs", jobs, "Parallel runs")->check(CLI::PositiveNumber);

  std::string measures_path;
  auto* ms = app.add_subcommand("measures", "Print realized S, V and Vbar of a config's environment");
  ms->add_option("--config", measures_path, "Config JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : validation;
  }

  try {
    if (*run) return cmd_run(rf);
    if (*sw) return cmd_sweep(grid_path, jobs);
    if (*ms) return cmd_measures(measures_path);
  } catch (const nscmab::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return validation;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return runtime;
  }
  return ok;
}
