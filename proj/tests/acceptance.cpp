// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails.

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "nscmab/ada_lcmab.hpp"
#include "nscmab/bob.hpp"
#include "nscmab/cucb_sw.hpp"
#include "nscmab/exp3p.hpp"
#include "nscmab/ftrl.hpp"
#include "nscmab/harness.hpp"
#include "nscmab/simulation.hpp"

using namespace nscmab;
namespace fs = std::filesystem;

namespace {

const TriggeringModel kFull{Triggering::full};
const RewardModel kLinear{RewardKind::linear};

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

std::vector<Action> random_actions(Rng& rng, int m, int count) {
  std::set<Action> seen;
  while (static_cast<int>(seen.size()) < count) {
    Action a;
    for (int i = 0; i < m; ++i)
      if (bernoulli(rng, 0.5)) a.push_back(i);
    if (!a.empty()) seen.insert(a);
  }
  return {seen.begin(), seen.end()};
}

// Every arm appears in some action.
std::vector<Action> random_cover(Rng& rng, int m, int count) {
  while (true) {
    const auto out = random_actions(rng, m, count);
    std::set<Arm> hit;
    for (const auto& a : out) hit.insert(a.begin(), a.end());
    if (static_cast<int>(hit.size()) == m) return out;
  }
}

std::vector<Action> all_subsets_of_size(int m, int K) {
  std::vector<Action> out;
  for (unsigned mask = 0; mask < (1u << m); ++mask) {
    if (std::popcount(mask) != K) continue;
    Action a;
    for (int i = 0; i < m; ++i)
      if (mask >> i & 1u) a.push_back(i);
    out.push_back(a);
  }
  return out;
}

double brute_max(const std::vector<Action>& actions, const std::function<double(const Action&)>& f) {
  double best = -1e300;
  for (const auto& a : actions) best = std::max(best, f(a));
  return best;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

Outcome oracle_equivalence() {
  Rng rng(101);
  int mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int m = 2 + static_cast<int>(uniform_index(rng, 7));
    const bool top = trial % 2 == 0;
    const int K = 1 + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(m)));
    const auto actions = top ? all_subsets_of_size(m, K)
                             : random_actions(rng, m, 1 + static_cast<int>(uniform_index(
                                                              rng, static_cast<std::uint64_t>(std::min(30, (1 << m) - 1)))));
    const auto space = top ? ActionSpace::top_k(m, K) : ActionSpace::enumerated(m, actions);
    const RewardModel reward{trial % 4 < 2 ? RewardKind::linear : RewardKind::disjunctive};
    const auto mu = uniform_means(rng, m);
    std::vector<double> signed_w(static_cast<std::size_t>(m));
    for (auto& v : signed_w) v = 2.0 * uniform01(rng) - 1.0;

    auto value = [&](const Action& a) { return expected_reward(a, mu, reward); };
    const double best = brute_max(actions, value);
    if (value(exact_oracle(mu, space, reward)) != best) ++mismatches;
    auto signed_value = [&](const Action& a) { return linear_value(a, signed_w); };
    const double best_signed = brute_max(actions, signed_value);
    if (signed_value(signed_linear_oracle(signed_w, space)) != best_signed) ++mismatches;
  }
  return {mismatches == 0, std::to_string(mismatches) + " mismatches in 2000 oracle calls"};
}

Outcome ftrl_properties() {
  Rng rng(102);
  double worst_regret = 1e300, worst_variance = 1e300, worst_rebuild = 0.0, worst_floor = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int m = 2 + static_cast<int>(uniform_index(rng, 5));
    const int count = std::min(1 + static_cast<int>(uniform_index(rng, 20)), (1 << m) - 1);
    const auto actions = random_cover(rng, m, count);
    const auto space = ActionSpace::enumerated(m, actions);
    std::vector<double> mu(static_cast<std::size_t>(m));
    for (auto& v : mu) v = 3.0 * uniform01(rng);
    std::vector<double> uniform(static_cast<std::size_t>(m), 0.0);
    for (const auto& a : actions)
      for (Arm i : a) uniform[static_cast<std::size_t>(i)] += 1.0 / static_cast<double>(actions.size());
    const double floor = *std::min_element(uniform.begin(), uniform.end());
    const double nu = std::max(1e-4, uniform01(rng) * 0.9 * std::min(floor, 0.5 / m));
    const double C = 100.0;
    const auto sol = ftrl_solve(mu, nu, space, C);

    double best = -1e300;
    for (const auto& a : actions) best = std::max(best, linear_value(a, mu));
    double expected_regret = 0.0;
    for (std::size_t k = 0; k < sol.distribution.actions.size(); ++k)
      expected_regret += sol.distribution.weights[k] * (best - linear_value(sol.distribution.actions[k], mu));
    worst_regret = std::min(worst_regret, C * m * nu - expected_regret);
    for (const auto& a : actions) {
      double var = 0.0;
      for (Arm i : a) var += 1.0 / sol.q[static_cast<std::size_t>(i)];
      worst_variance = std::min(worst_variance, m + (best - linear_value(a, mu)) / (C * nu) - var);
    }
    const auto rebuilt = sol.distribution.marginals(m);
    for (int i = 0; i < m; ++i) {
      worst_rebuild = std::max(worst_rebuild, std::abs(rebuilt[static_cast<std::size_t>(i)] - sol.q[static_cast<std::size_t>(i)]));
      worst_floor = std::max(worst_floor, nu - sol.q[static_cast<std::size_t>(i)]);
    }
  }
  const bool pass = worst_regret >= -1e-6 && worst_variance >= -1e-6 && worst_rebuild <= 1e-9 && worst_floor <= 1e-9;
  return {pass, fmt("min regret slack %.3g, min variance slack %.3g, max reconstruction error %.3g, max floor violation %.3g",
                    worst_regret, worst_variance, worst_rebuild, worst_floor)};
}

Outcome estimator_unbiased() {
  Rng rng(103);
  int outside = 0;
  double worst_z = 0.0;
  for (int state = 0; state < 10; ++state) {
    const int m = 3 + static_cast<int>(uniform_index(rng, 4));
    const bool top = state % 2 == 0;
    const auto space = top ? ActionSpace::top_k(m, 1 + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(m - 1))))
                           : ActionSpace::enumerated(m, random_cover(rng, m, std::min(6, (1 << m) - 1)));
    std::vector<double> mu_hat(static_cast<std::size_t>(m));
    for (auto& v : mu_hat) v = 2.0 * uniform01(rng);
    std::vector<double> unif(static_cast<std::size_t>(m), 0.0);
    const auto support = space.enumerate();
    for (const auto& a : support)
      for (Arm i : a) unif[static_cast<std::size_t>(i)] += 1.0 / static_cast<double>(support.size());
    const double nu = 0.5 * *std::min_element(unif.begin(), unif.end());
    const auto sol = ftrl_solve(mu_hat, nu, space);
    const auto mu = uniform_means(rng, m);
    const int N = 100000;
    std::vector<double> sum(static_cast<std::size_t>(m), 0.0), sq(static_cast<std::size_t>(m), 0.0);
    for (int k = 0; k < N; ++k) {
      const auto S = sol.distribution.sample(rng);
      std::vector<Observation> obs;
      for (Arm i : S) obs.push_back({i, bernoulli(rng, mu[static_cast<std::size_t>(i)]) ? 1 : 0});
      const auto est = importance_estimate(S, obs, sol.q);
      for (std::size_t i = 0; i < est.size(); ++i) {
        sum[i] += est[i];
        sq[i] += est[i] * est[i];
      }
    }
    for (std::size_t i = 0; i < sum.size(); ++i) {
      const double mean = sum[i] / N, sd = std::sqrt((sq[i] / N - mean * mean) / N);
      const double z = sd > 0.0 ? std::abs(mean - mu[i]) / sd : (mean == mu[i] ? 0.0 : 1e9);
      worst_z = std::max(worst_z, z);
      outside += z > 3.0;
    }
  }
  return {outside == 0, fmt("largest |z| %.3f, coordinates outside 3 sigma: %.0f", worst_z, outside)};
}

Outcome confidence_coverage() {
  const Round T = 2000;
  const int m = 10;
  const auto space = ActionSpace::top_k(m, 3);
  std::int64_t bad = 0, total = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng gen = make_stream(seed, 0), env = make_stream(seed, 1);
    const EnvSchedule sched(m, T, {{1, uniform_means(gen, m)}});
    CucbSw policy(m, T, T, make_exact_oracle(space, kLinear));
    for (Round t = 1; t <= T; ++t) {
      const Action a = policy.act(t);
      bool violated = false;
      for (int i = 0; i < m; ++i) {
        if (policy.state().count(i) == 0) continue;
        const double err = std::abs(policy.state().mean(i) - sched.means(t)[static_cast<std::size_t>(i)]);
        violated = violated || !(err < policy.state().radius(i));
      }
      bad += violated;
      ++total;
      policy.observe(t, sample_round(sched, t, a, kFull, kLinear, env));
    }
  }
  const double frac = static_cast<double>(bad) / static_cast<double>(total);
  return {frac <= 0.01, fmt("violating rounds %.0f of %.0f (%.4f%%)", static_cast<double>(bad),
                            static_cast<double>(total), 100.0 * frac)};
}

Outcome exp3p_regret() {
  const int K = 8;
  const std::int64_t T = 10000;
  std::vector<double> regrets;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Exp3p e(K, T);
    Rng rng = make_stream(seed, 2);
    double reward = 0.0;
    for (std::int64_t t = 0; t < T; ++t) {
      const int arm = e.select(rng);
      const double g = arm == 0 ? 1.0 : 0.0;
      reward += g;
      e.update(arm, g);
    }
    regrets.push_back(static_cast<double>(T) - reward);
  }
  const double bound = 5.0 * std::sqrt(K * static_cast<double>(T) * std::log(double(K)));
  return {mean_of(regrets) <= bound, fmt("mean regret %.1f, bound %.1f", mean_of(regrets), bound)};
}

// Piecewise instance for the scaling experiments: m = 6, top-2, min_gap 0.3.
struct ScalingInstance {
  static constexpr Round T = 20000;
  static constexpr int m = 6;
  ActionSpace space = ActionSpace::top_k(m, 2);

  EnvSchedule schedule(std::int64_t segments, std::uint64_t seed) const {
    Rng gen = make_stream(seed, 0);
    return make_piecewise(m, T, segments, uniform_means, 0.3, gen);
  }
  double cucb_sw(const EnvSchedule& sched, Round window, std::uint64_t seed) const {
    CucbSw policy(m, window, T, make_exact_oracle(space, kLinear));
    Rng env = make_stream(seed, 1);
    return simulate(sched, policy, kFull, kLinear, space, env, seed).cumulative();
  }
};

Outcome cucb_sw_scaling() {
  const ScalingInstance inst;
  std::vector<double> xs, ys;
  double tuned32 = 0.0, untuned32 = 0.0;
  std::string detail;
  for (std::int64_t S : {2, 8, 32}) {
    const Round w = recommended_window(ScalingInstance::T, static_cast<double>(S), BoundMode::dep,
                                       ScalingInstance::m, 2);
    std::vector<double> regrets, full;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto sched = inst.schedule(S, seed);
      regrets.push_back(inst.cucb_sw(sched, w, seed));
      if (S == 32) full.push_back(inst.cucb_sw(sched, ScalingInstance::T, seed));
    }
    xs.push_back(std::log(static_cast<double>(S)));
    ys.push_back(std::log(mean_of(regrets)));
    detail += fmt("S=%.0f w=%.0f regret %.1f; ", static_cast<double>(S), static_cast<double>(w), mean_of(regrets));
    if (S == 32) {
      tuned32 = mean_of(regrets);
      untuned32 = mean_of(full);
    }
  }
  const double mx = mean_of(xs), my = mean_of(ys);
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    num += (xs[k] - mx) * (ys[k] - my);
    den += (xs[k] - mx) * (xs[k] - mx);
  }
  const double slope = num / den, ratio = tuned32 / untuned32;
  detail += fmt("slope %.3f, S=32 tuned/w=T ratio %.3f (w=T regret %.1f)", slope, ratio, untuned32);
  return {slope >= 0.2 && slope <= 0.6 && ratio <= 0.6, detail};
}

Outcome bob_competitive() {
  const ScalingInstance inst;
  const Round T = ScalingInstance::T;
  const int seeds = 10;
  std::vector<EnvSchedule> scheds;
  for (std::uint64_t seed = 0; seed < seeds; ++seed) scheds.push_back(inst.schedule(8, seed));
  const double R2 = 2.0;
  const Round L = recommended_block(T, ScalingInstance::m, 2, R2, BoundMode::indep);
  // Also track the best window the master can choose, i.e. at most L.
  double best = 1e300, best_reachable = 1e300;
  Round best_w = 0;
  for (Round w = 1; w <= T; w *= 2) {
    std::vector<double> r;
    for (std::uint64_t seed = 0; seed < seeds; ++seed) r.push_back(inst.cucb_sw(scheds[seed], w, seed));
    if (mean_of(r) < best) {
      best = mean_of(r);
      best_w = w;
    }
    if (w <= L) best_reachable = std::min(best_reachable, mean_of(r));
  }
  std::vector<double> r;
  for (std::uint64_t seed = 0; seed < seeds; ++seed) {
    CucbBob bob(ScalingInstance::m, T, L, 0.0, R2, make_exact_oracle(inst.space, kLinear), make_stream(seed, 2));
    Rng env = make_stream(seed, 1);
    r.push_back(simulate(scheds[seed], bob, kFull, kLinear, inst.space, env, seed).cumulative());
  }
  const double ratio = mean_of(r) / best;
  return {ratio <= 3.0, fmt("BoB (L=%.0f) regret %.1f, best window %.0f regret %.1f", static_cast<double>(L),
                            mean_of(r), static_cast<double>(best_w), best) +
                            fmt(", ratio %.3f; best window <= L regret %.1f", ratio, best_reachable)};
}

Outcome ada_restarts() {
  const auto space = ActionSpace::top_k(4, 1);
  const Round T = 8192;
  const auto c = make_ada_constants(0.05, T, space, desk_scale_overrides(4));
  const std::vector<double> pre{0.75, 0.25, 0.25, 0.25}, post{0.25, 0.75, 0.25, 0.25};
  const EnvSchedule flip(4, T, {{1, pre}, {T / 2 + 1, post}});
  const EnvSchedule still(4, T, {{1, pre}});
  int detected = 0, alarms = 0;
  const int seeds = 20;
  for (std::uint64_t seed = 0; seed < seeds; ++seed) {
    AdaLcmab a(space, c, make_stream(seed, 2)), b(space, c, make_stream(seed, 2));
    Rng ra = make_stream(seed, 1), rb = make_stream(seed, 1);
    simulate(flip, a, kFull, kLinear, space, ra, seed);
    simulate(still, b, kFull, kLinear, space, rb, seed);
    bool after = false;
    for (const auto& r : a.restarts()) after = after || r.round > T / 2;
    detected += after;
    alarms += !b.restarts().empty();
  }
  const bool pass = detected >= 0.8 * seeds && alarms <= 0.1 * seeds;
  return {pass, fmt("L=%.0f; restart after flip in %.0f/20 seeds; stationary restarts in %.0f/20 seeds",
                    static_cast<double>(c.L), detected, alarms)};
}

Outcome restart_test_equivalence() {
  Rng rng(109);
  int mismatches = 0, fails = 0;
  auto regret = [](const std::vector<double>& mean, const std::vector<Action>& actions, const Action& S) {
    double best = -1e300;
    for (const auto& a : actions) best = std::max(best, linear_value(a, mean));
    return best - linear_value(S, mean);
  };
  auto brute = [&](const std::vector<double>& a, const std::vector<double>& b, const std::vector<Action>& actions,
                   double thr) {
    for (const auto& S : actions) {
      const double ra = regret(a, actions, S), rb = regret(b, actions, S);
      if (ra - 4 * rb >= thr || rb - 4 * ra >= thr) return true;
    }
    return false;
  };
  for (int trial = 0; trial < 100; ++trial) {
    const int m = 2 + static_cast<int>(uniform_index(rng, 4));
    const auto actions = random_actions(rng, m, std::min(1 + static_cast<int>(uniform_index(rng, 12)), (1 << m) - 1));
    const auto space = ActionSpace::enumerated(m, actions);
    const auto c = make_ada_constants(0.05, 4096, space, desk_scale_overrides(m));
    auto draw = [&] {
      auto v = uniform_means(rng, m);
      for (auto& x : v) x *= 12.0 * uniform01(rng);
      return v;
    };
    const auto a = draw(), b = draw();
    const int n = static_cast<int>(uniform_index(rng, 3));
    const bool expect_replay = brute(a, b, actions, c.replay_threshold(n));
    fails += expect_replay;
    mismatches += end_of_replay_test(make_interval_stats(a, space), make_interval_stats(b, space), n, c, space).fail !=
                  expect_replay;
    std::vector<IntervalStats> earlier;
    bool expect_block = false;
    for (int k = 0; k < 3; ++k) {
      const auto e = draw();
      earlier.push_back(make_interval_stats(e, space));
      expect_block = expect_block || brute(a, e, actions, c.block_threshold(k));
    }
    mismatches += end_of_block_test(make_interval_stats(a, space), earlier, c, space).fail != expect_block;
  }
  return {mismatches == 0, fmt("%.0f mismatches in 200 decisions (%.0f replay-test failures)", mismatches, fails)};
}

Outcome environment_measures() {
  Rng rng(110);
  int bad = 0;
  double worst_v = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int m = 1 + static_cast<int>(uniform_index(rng, 14));
    const Round T = 50 + static_cast<Round>(uniform_index(rng, 2000));
    SwitchingMeasures s;
    if (trial % 2 == 0) {
      const auto S = 1 + static_cast<std::int64_t>(uniform_index(rng, 40));
      s = realized_measures(make_piecewise(m, T, S, uniform_means, 0.2, rng));
      bad += s.switching != S;
    } else {
      const double V = 0.5 * static_cast<double>(T - 1) * uniform01(rng);
      s = realized_measures(make_drift(m, T, V, rng));
      worst_v = std::max(worst_v, std::abs(s.variation - V));
      bad += std::abs(s.variation - V) > 1e-9;
    }
    bad += !(s.variation <= s.total_variation + 1e-12);
    bad += !(s.variation <= static_cast<double>(s.switching) + 1e-12);
  }
  return {bad == 0, fmt("%.0f violations in 200 schedules, worst |V - requested| %.3g", bad, worst_v)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const auto root = fs::temp_directory_path() / "nscmab_acceptance_determinism";
  fs::remove_all(root);
  std::vector<json> configs{
      {{"T", 3000},
       {"env", {{"kind", "piecewise"}, {"m", 6}, {"parameters", {{"segments", 5}, {"min_gap", 0.3}}}, {"seed", 4}}},
       {"triggering", "full"},
       {"reward", "linear"},
       {"space", {{"kind", "top_k"}, {"K", 2}}},
       {"algo", {{"name", "cucb_bob"}, {"L", "auto"}}},
       {"seeds", {0, 1, 2}}},
      {{"T", 3000},
       {"env", {{"kind", "drift"}, {"m", 4}, {"parameters", {{"variation", 3.0}}}, {"seed", 5}}},
       {"triggering", "cascade"},
       {"reward", "disjunctive"},
       {"space", {{"kind", "top_k"}, {"K", 2}}},
       {"oracle", {{"alpha", 0.8}, {"beta", 0.9}}},
       {"algo", {{"name", "cucb_sw"}, {"window", "auto"}, {"measure", "V"}}},
       {"seeds", {7, 8}}},
      {{"T", 3000},
       {"env", {{"kind", "piecewise"}, {"m", 4}, {"parameters", {{"segments", 2}, {"min_gap", 0.4}}}, {"seed", 6}}},
       {"triggering", "full"},
       {"reward", "linear"},
       {"space", {{"kind", "top_k"}, {"K", 1}}},
       {"algo", {{"name", "ada_lcmab"}, {"constants_override", "desk"}}},
       {"seeds", {3, 9}}}};
  int files = 0, differ = 0;
  for (std::size_t k = 0; k < configs.size(); ++k) {
    std::vector<fs::path> dirs;
    for (const char* tag : {"a", "b"}) {
      json c = configs[k];
      dirs.push_back(root / ("cfg" + std::to_string(k) + tag));
      c["out_dir"] = dirs.back().string();
      run(parse_config(c));
    }
    for (const auto& entry : fs::directory_iterator(dirs[0])) {
      if (entry.path().extension() != ".csv") continue;
      ++files;
      differ += slurp(entry.path()) != slurp(dirs[1] / entry.path().filename());
    }
  }
  fs::remove_all(root);
  return {differ == 0 && files == 7, fmt("%.0f of %.0f CSV files differ", differ, files)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"oracle equivalence", oracle_equivalence},
      {"FTRL guarantees", ftrl_properties},
      {"importance-weight unbiasedness", estimator_unbiased},
      {"confidence coverage", confidence_coverage},
      {"EXP3.P regret", exp3p_regret},
      {"CUCB-SW scaling", cucb_sw_scaling},
      {"CUCB-BoB competitiveness", bob_competitive},
      {"Ada-LCMAB restart behavior", ada_restarts},
      {"restart-test oracle equivalence", restart_test_equivalence},
      {"environment measures", environment_measures},
      {"determinism", determinism},
  };
  int failed = 0, broken = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = criteria[k].second();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
      ++broken;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += !out.pass;
    std::printf("%s %2zu %s (%.1f s): %s\n", out.pass ? "PASS" : "FAIL", k + 1, criteria[k].first.c_str(), secs,
                out.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed, %d could not be evaluated\n", failed, criteria.size(), broken);
  return failed == 0 ? 0 : 1;
}
