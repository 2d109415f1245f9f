#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "ada_lcmab.hpp"
#include "bob.hpp"
#include "core.hpp"
#include "cucb_sw.hpp"
#include "env.hpp"
#include "metrics.hpp"
#include "oracles.hpp"
#include "policy.hpp"
#include "rng.hpp"
#include "simulation.hpp"

namespace nscmab {

using nlohmann::json;

// Raised with every offending field listed, one per line.
struct ValidationError : ConfigError {
  std::vector<std::string> fields;
  explicit ValidationError(std::vector<std::string> problems)
      : ConfigError(join(problems)), fields(std::move(problems)) {}

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string s = "invalid config:";
    for (const auto& p : v) s += "\n  " + p;
    return s;
  }
};

// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Per-seed substreams. Index 0 is reserved for schedule generation.
enum class Stream : std::uint64_t { env = 1, policy = 2, oracle = 3, oracle_build = 4 };

inline Rng stream_for(std::uint64_t seed, Stream s) { return make_stream(seed, static_cast<std::uint64_t>(s)); }

struct AlgoConfig {
  std::string name;
  // cucb_sw
  std::optional<Round> window;
  std::string measure = "S";
  BoundMode mode = BoundMode::dep;
  // cucb_bob
  std::optional<Round> block;
  std::optional<double> r1, r2;
  // ada_lcmab
  double delta = 0.05;
  LogBase log_base = LogBase::natural;
  json constants_override;
};

struct RunConfig {
  Round T = 0;
  json env;
  TriggeringModel triggering;
  RewardModel reward;
  json space;
  OracleSpec oracle;
  AlgoConfig algo;
  std::vector<std::uint64_t> seeds;
  std::string out_dir;
  json document;  // normalized document, defaults filled in

  json canonical() const {
    json c = document;
    c.erase("out_dir");
    return c;
  }
  // Hash of the sorted-key serialization without the output path.
  std::string hash() const { return hex64(fnv1a(canonical().dump())); }
};

namespace detail {

inline const std::vector<std::string>& known_top_level() {
  static const std::vector<std::string> keys{"T",      "env",   "triggering", "reward", "space",
                                             "oracle", "algo",  "seeds",      "out_dir"};
  return keys;
}

template <class F>
void check_field(std::vector<std::string>& problems, const std::string& field, F&& f) {
  try {
    f();
  } catch (const ValidationError& e) {
    problems.insert(problems.end(), e.fields.begin(), e.fields.end());
  } catch (const std::exception& e) {
    problems.push_back(field + ": " + e.what());
  }
}

inline AlgoConfig parse_algo(const json& j, std::vector<std::string>& problems) {
  AlgoConfig a;
  if (!j.is_object() || !j.contains("name") || !j["name"].is_string()) {
    problems.push_back("algo.name: required string (cucb_sw, cucb_bob, ada_lcmab)");
    return a;
  }
  a.name = j["name"].get<std::string>();
  auto allow = [&](std::initializer_list<const char*> keys) {
    for (const auto& [k, _] : j.items()) {
      bool ok = k == "name";
      for (const char* x : keys) ok = ok || k == x;
      if (!ok) problems.push_back("algo." + k + ": unknown field for " + a.name);
    }
  };
  if (a.name == "cucb_sw") {
    allow({"window", "measure", "mode"});
    check_field(problems, "algo.window", [&] {
      const auto& w = j.at("window");
      if (w.is_string()) {
        if (w.get<std::string>() != "auto") throw ConfigError("must be a positive integer or \"auto\"");
      } else {
        a.window = w.get<Round>();
        if (*a.window < 1) throw ConfigError("must be >= 1");
      }
    });
    check_field(problems, "algo.measure", [&] {
      a.measure = j.value("measure", "S");
      if (a.measure != "S" && a.measure != "V") throw ConfigError("must be \"S\" or \"V\"");
    });
    check_field(problems, "algo.mode", [&] { a.mode = parse_mode(j.value("mode", "dep")); });
  } else if (a.name == "cucb_bob") {
    allow({"L", "mode", "R1", "R2"});
    check_field(problems, "algo.L", [&] {
      const auto& L = j.at("L");
      if (L.is_string()) {
        if (L.get<std::string>() != "auto") throw ConfigError("must be a positive integer or \"auto\"");
      } else {
        a.block = L.get<Round>();
        if (*a.block < 1) throw ConfigError("must be >= 1");
      }
    });
    check_field(problems, "algo.mode", [&] { a.mode = parse_mode(j.value("mode", "indep")); });
    check_field(problems, "algo.R1", [&] {
      if (j.contains("R1")) a.r1 = j["R1"].get<double>();
    });
    check_field(problems, "algo.R2", [&] {
      if (j.contains("R2")) a.r2 = j["R2"].get<double>();
    });
  } else if (a.name == "ada_lcmab") {
    allow({"delta", "log_base", "constants_override"});
    check_field(problems, "algo.delta", [&] {
      a.delta = j.value("delta", 0.05);
      if (!(a.delta > 0.0 && a.delta < 1.0)) throw ConfigError("must be in (0,1)");
    });
    check_field(problems, "algo.log_base", [&] {
      const auto& b = j.contains("log_base") ? j["log_base"] : json("e");
      a.log_base = parse_log_base(b.is_number() ? std::to_string(b.get<int>()) : b.get<std::string>());
    });
    check_field(problems, "algo.constants_override", [&] {
      a.constants_override = j.value("constants_override", json(nullptr));
      const auto& o = a.constants_override;
      if (o.is_string()) {
        if (o.get<std::string>() != "desk") throw ConfigError("string form must be \"desk\"");
      } else {
        AdaOverrides::from_json(o);
      }
    });
  } else {
    problems.push_back("algo.name: unknown algorithm '" + a.name + "'");
  }
  return a;
}

}  // namespace detail

inline ActionSpace space_from_json(const json& j, int m) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "top_k") return ActionSpace::top_k(m, j.at("K").get<int>());
  if (kind == "enumerated") return ActionSpace::enumerated(m, j.at("actions").get<std::vector<Action>>());
  throw ConfigError("space kind must be top_k or enumerated, got '" + kind + "'");
}

// Parses and validates; every problem found is reported together.
inline RunConfig parse_config(const json& doc) {
  std::vector<std::string> problems;
  RunConfig c;
  if (!doc.is_object()) throw ValidationError({"config: must be a JSON object"});
  for (const auto& [k, _] : doc.items()) {
    const auto& known = detail::known_top_level();
    if (std::find(known.begin(), known.end(), k) == known.end()) problems.push_back(k + ": unknown field");
  }
  json norm = doc;

  detail::check_field(problems, "T", [&] {
    c.T = doc.at("T").get<Round>();
    if (c.T < 1) throw ConfigError("must be >= 1");
  });
  int m = 0;
  detail::check_field(problems, "env", [&] {
    c.env = doc.at("env");
    if (!c.env.is_object()) throw ConfigError("must be an object");
    m = c.env.at("m").get<int>();
    if (m < 1) throw ConfigError("env.m must be >= 1");
    if (c.env.contains("horizon") && c.T > 0 && c.env["horizon"].get<Round>() != c.T)
      throw ConfigError("env.horizon disagrees with T");
    c.env["horizon"] = c.T;
    if (c.T > 0) schedule_from_json(c.env);
  });
  norm["env"] = c.env;
  detail::check_field(problems, "triggering", [&] {
    c.triggering.kind = parse_triggering(doc.value("triggering", "full"));
  });
  detail::check_field(problems, "reward", [&] { c.reward.kind = parse_reward(doc.value("reward", "linear")); });
  norm["triggering"] = to_string(c.triggering.kind);
  norm["reward"] = to_string(c.reward.kind);
  detail::check_field(problems, "reward", [&] { check_compatible(c.triggering, c.reward); });
  detail::check_field(problems, "space", [&] {
    c.space = doc.at("space");
    if (m >= 1) space_from_json(c.space, m);
  });
  detail::check_field(problems, "oracle", [&] {
    const json o = doc.value("oracle", json::object());
    c.oracle.alpha = o.value("alpha", 1.0);
    c.oracle.beta = o.value("beta", 1.0);
    c.oracle.validate();
    norm["oracle"] = {{"alpha", c.oracle.alpha}, {"beta", c.oracle.beta}};
  });
  if (doc.contains("algo"))
    c.algo = detail::parse_algo(doc["algo"], problems);
  else
    problems.push_back("algo: required");
  if (c.algo.name == "ada_lcmab") {
    if (c.reward.kind != RewardKind::linear || c.triggering.kind != Triggering::full)
      problems.push_back("algo: ada_lcmab needs linear reward with full triggering");
    if (!c.oracle.is_exact()) problems.push_back("oracle: ada_lcmab needs the exact oracle (alpha = beta = 1)");
  }
  detail::check_field(problems, "seeds", [&] {
    c.seeds = doc.at("seeds").get<std::vector<std::uint64_t>>();
    if (c.seeds.empty()) throw ConfigError("must list at least one seed");
  });
  detail::check_field(problems, "out_dir", [&] { c.out_dir = doc.value("out_dir", "out"); });
  norm["out_dir"] = c.out_dir;
  if (!problems.empty()) throw ValidationError(problems);
  c.document = norm;
  return c;
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

// Write to a sibling temporary and rename over the target.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ostringstream tag;
  tag << std::this_thread::get_id();
  const auto tmp = path.string() + ".tmp." + tag.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out << content;
    if (!out.flush()) throw std::runtime_error("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

// Everything a run derives from its config before any seed is played.
struct ResolvedRun {
  EnvSchedule schedule;
  ActionSpace space;
  SwitchingMeasures measures;
  json resolved;  // algorithm parameters actually used
};

inline ResolvedRun resolve(const RunConfig& c) {
  auto schedule = schedule_from_json(c.env);
  auto space = space_from_json(c.space, schedule.m());
  const auto measures = realized_measures(schedule);
  json r{{"algo", c.algo.name}};
  const int m = space.m(), K = space.k_max();
  if (c.algo.name == "cucb_sw") {
    if (c.algo.window) {
      r["window"] = *c.algo.window;
    } else {
      const double value =
          c.algo.measure == "S" ? static_cast<double>(measures.switching) : measures.variation;
      r["window"] = recommended_window(c.T, value, c.algo.mode, m, K);
      r["window_source"] = {{"measure", c.algo.measure},
                            {"value", value},
                            {"mode", c.algo.mode == BoundMode::dep ? "dep" : "indep"}};
    }
    if (r["window"].get<Round>() > c.T) r["window"] = c.T;
  } else if (c.algo.name == "cucb_bob") {
    const double r1 = c.algo.r1.value_or(0.0);
    const double r2 = c.algo.r2.value_or(c.reward.kind == RewardKind::linear ? static_cast<double>(K) : 1.0);
    if (!(r2 > r1)) throw ConfigError("algo: R2 must exceed R1");
    const Round L = c.algo.block ? std::min(*c.algo.block, c.T)
                                 : recommended_block(c.T, m, K, r2 - r1, c.algo.mode);
    r["L"] = L;
    r["R1"] = r1;
    r["R2"] = r2;
    r["master_windows"] = window_exponent(L) + 1;
  } else {
    AdaOverrides o;
    if (c.algo.constants_override.is_string())
      o = desk_scale_overrides(m);
    else
      o = AdaOverrides::from_json(c.algo.constants_override);
    r["constants"] = make_ada_constants(c.algo.delta, c.T, space, o, c.algo.log_base).to_json();
  }
  return {std::move(schedule), std::move(space), measures, std::move(r)};
}

inline OracleFn make_policy_oracle(const RunConfig& c, const ActionSpace& space, std::uint64_t seed) {
  if (c.oracle.is_exact()) return make_exact_oracle(space, c.reward);
  Rng build = stream_for(seed, Stream::oracle_build);
  auto degraded = std::make_shared<DegradedOracle>(c.oracle, space, c.reward, build);
  auto rng = std::make_shared<Rng>(stream_for(seed, Stream::oracle));
  return [degraded, rng](std::span<const double> w) { return (*degraded)(w, *rng); };
}

inline std::unique_ptr<Policy> make_policy(const RunConfig& c, const ResolvedRun& rr, std::uint64_t seed) {
  const int m = rr.space.m();
  if (c.algo.name == "cucb_sw")
    return std::make_unique<CucbSw>(m, rr.resolved["window"].get<Round>(), c.T,
                                    make_policy_oracle(c, rr.space, seed));
  if (c.algo.name == "cucb_bob")
    return std::make_unique<CucbBob>(m, c.T, rr.resolved["L"].get<Round>(), rr.resolved["R1"].get<double>(),
                                     rr.resolved["R2"].get<double>(), make_policy_oracle(c, rr.space, seed),
                                     stream_for(seed, Stream::policy));
  AdaOverrides o = c.algo.constants_override.is_string() ? desk_scale_overrides(m)
                                                         : AdaOverrides::from_json(c.algo.constants_override);
  return std::make_unique<AdaLcmab>(rr.space, make_ada_constants(c.algo.delta, c.T, rr.space, o, c.algo.log_base),
                                    stream_for(seed, Stream::policy));
}

struct SeedResult {
  std::uint64_t seed = 0;
  RegretLedger ledger{0};
  json snapshot;
};

inline SeedResult run_seed(const RunConfig& c, const ResolvedRun& rr, std::uint64_t seed) {
  auto policy = make_policy(c, rr, seed);
  Rng env_rng = stream_for(seed, Stream::env);
  auto ledger = simulate(rr.schedule, *policy, c.triggering, c.reward, rr.space, env_rng, seed, c.oracle);
  return {seed, std::move(ledger), policy->snapshot()};
}

inline std::string seed_csv_name(std::uint64_t seed) { return "seed_" + std::to_string(seed) + ".csv"; }

inline json make_summary(const RunConfig& c, const ResolvedRun& rr, const std::vector<SeedResult>& results) {
  std::vector<double> finals;
  auto diagnostics = json::array();
  for (const auto& r : results) {
    finals.push_back(r.ledger.cumulative());
    diagnostics.push_back(r.snapshot);
  }
  double mean = 0.0, var = 0.0;
  for (double f : finals) mean += f;
  mean /= static_cast<double>(finals.size());
  for (double f : finals) var += (f - mean) * (f - mean);
  const double sd = finals.size() > 1 ? std::sqrt(var / static_cast<double>(finals.size() - 1)) : 0.0;
  return {{"config_hash", c.hash()},
          {"seeds", c.seeds},
          {"final_regret_mean", mean},
          {"final_regret_std", sd},
          {"final_regrets", finals},
          {"realized_S", rr.measures.switching},
          {"realized_V", rr.measures.variation},
          {"realized_Vbar", rr.measures.total_variation},
          {"realized_Vbar_is_upper_bound", rr.measures.total_variation_is_upper_bound},
          {"resolved", rr.resolved},
          {"config", c.canonical()},
          {"diagnostics", diagnostics}};
}

// One CSV per seed plus summary.json under out_dir.
inline json run(const RunConfig& c) {
  const auto rr = resolve(c);
  std::vector<SeedResult> results;
  const std::filesystem::path dir(c.out_dir);
  for (auto seed : c.seeds) {
    results.push_back(run_seed(c, rr, seed));
    write_atomic(dir / seed_csv_name(seed), results.back().ledger.to_csv());
  }
  auto summary = make_summary(c, rr, results);
  write_atomic(dir / "summary.json", summary.dump(2) + "\n");
  return summary;
}

inline json measures_report(const RunConfig& c) {
  const auto schedule = schedule_from_json(c.env);
  json j = to_json(realized_measures(schedule));
  j["change_points"] = schedule.change_points();
  return j;
}

// Dotted path to JSON pointer: "env.parameters.segments" -> /env/parameters/segments.
inline json::json_pointer dotted_pointer(const std::string& path) {
  std::string p;
  std::stringstream ss(path);
  std::string part;
  while (std::getline(ss, part, '.')) {
    if (part.empty()) throw ConfigError("empty component in axis path '" + path + "'");
    p += "/" + part;
  }
  if (p.empty()) throw ConfigError("empty axis path");
  return json::json_pointer(p);
}

struct SweepAxis {
  std::string path;
  std::vector<json> values;
};

struct SweepGrid {
  json base;
  std::vector<SweepAxis> axes;
  std::string out_dir = "sweep";

  static SweepGrid from_json(const json& j) {
    SweepGrid g;
    std::vector<std::string> problems;
    for (const auto& [k, _] : j.items())
      if (k != "base" && k != "axes" && k != "out_dir") problems.push_back(k + ": unknown grid field");
    detail::check_field(problems, "base", [&] {
      g.base = j.at("base");
      if (!g.base.is_object()) throw ConfigError("must be an object");
    });
    detail::check_field(problems, "axes", [&] {
      for (const auto& a : j.value("axes", json::array())) {
        SweepAxis ax{a.at("path").get<std::string>(), a.at("values").get<std::vector<json>>()};
        dotted_pointer(ax.path);
        g.axes.push_back(std::move(ax));
      }
    });
    g.out_dir = j.value("out_dir", "sweep");
    if (!problems.empty()) throw ValidationError(problems);
    return g;
  }

  // Cartesian product, last axis fastest. No axes, or an axis without values,
  // means an empty grid.
  std::vector<std::vector<std::size_t>> cells() const {
    std::vector<std::vector<std::size_t>> out;
    if (axes.empty()) return out;
    for (const auto& a : axes)
      if (a.values.empty()) return out;
    std::vector<std::size_t> idx(axes.size(), 0);
    while (true) {
      out.push_back(idx);
      std::size_t k = axes.size();
      while (k > 0) {
        --k;
        if (++idx[k] < axes[k].values.size()) break;
        idx[k] = 0;
        if (k == 0) return out;
      }
    }
  }
};

struct CellResult {
  std::vector<json> values;
  std::string hash;
  std::string status;  // ok, resumed, invalid, error
  std::string message;
  std::vector<std::uint64_t> seeds;
  std::vector<double> finals;
};

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

// Runs every cell of the grid on up to `jobs` threads. A cell whose directory
// already holds a summary with the same config hash is reused. Rows come out
// in grid order whatever the scheduling.
inline std::vector<CellResult> sweep(const SweepGrid& grid, int jobs) {
  const auto cells = grid.cells();
  std::vector<CellResult> results(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < cells.size(); k = next++) {
      auto& res = results[k];
      json doc = grid.base;
      for (std::size_t a = 0; a < grid.axes.size(); ++a) {
        res.values.push_back(grid.axes[a].values[cells[k][a]]);
        doc[dotted_pointer(grid.axes[a].path)] = res.values.back();
      }
      RunConfig cfg;
      try {
        doc["out_dir"] = "";
        cfg = parse_config(doc);
        res.hash = cfg.hash();
        cfg.out_dir = (std::filesystem::path(grid.out_dir) / ("cell_" + res.hash)).string();
        cfg.document["out_dir"] = cfg.out_dir;
      } catch (const std::exception& e) {
        res.status = "invalid";
        res.message = e.what();
        continue;
      }
      try {
        const auto summary_path = std::filesystem::path(cfg.out_dir) / "summary.json";
        json summary;
        if (std::filesystem::exists(summary_path)) {
          summary = read_json_file(summary_path);
          if (summary.value("config_hash", "") == res.hash) res.status = "resumed";
        }
        if (res.status.empty()) {
          summary = run(cfg);
          res.status = "ok";
        }
        res.seeds = summary.at("seeds").get<std::vector<std::uint64_t>>();
        res.finals = summary.at("final_regrets").get<std::vector<double>>();
      } catch (const std::exception& e) {
        res.status = "error";
        res.message = e.what();
      }
    }
  };
  const int n = std::max(1, std::min<int>(jobs, static_cast<int>(cells.size())));
  std::vector<std::thread> pool;
  for (int i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return results;
}

// One row per (cell, seed); failed cells get a single row with the message.
// Resumed cells are reported as ok so reruns produce the same table.
inline std::string aggregate_csv(const SweepGrid& grid, const std::vector<CellResult>& results) {
  std::string out = "cell,config_hash";
  for (const auto& a : grid.axes) out += "," + csv_field(a.path);
  out += ",seed,final_regret,status,message\n";
  char buf[64];
  for (std::size_t k = 0; k < results.size(); ++k) {
    const auto& r = results[k];
    std::string prefix = std::to_string(k) + "," + r.hash;
    for (const auto& v : r.values) prefix += "," + csv_field(v.dump());
    if (r.status == "ok" || r.status == "resumed") {
      for (std::size_t s = 0; s < r.seeds.size(); ++s) {
        std::snprintf(buf, sizeof buf, "%.17g", r.finals[s]);
        out += prefix + "," + std::to_string(r.seeds[s]) + "," + buf + ",ok,\n";
      }
    } else {
      out += prefix + ",,," + r.status + "," + csv_field(r.message) + "\n";
    }
  }
  return out;
}

}  // namespace nscmab
