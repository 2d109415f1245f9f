#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "core.hpp"
#include "env.hpp"
#include "ftrl.hpp"
#include "oracles.hpp"
#include "policy.hpp"
#include "rng.hpp"

namespace nscmab {

enum class LogBase { natural, two };

inline LogBase parse_log_base(const std::string& s) {
  if (s == "e" || s == "ln" || s == "natural") return LogBase::natural;
  if (s == "2" || s == "log2") return LogBase::two;
  throw ConfigError("log_base must be 'e' or '2', got '" + s + "'");
}

// Optional replacements for the literal constants. The literal values give
// block lengths in the hundreds even for tiny m and test thresholds far above
// any attainable empirical regret at desk-scale horizons.
struct AdaOverrides {
  std::optional<double> c0;
  std::optional<double> barrier_c;
  std::optional<double> replay_coef;
  std::optional<double> block_coef;

  static AdaOverrides from_json(const nlohmann::json& j) {
    AdaOverrides o;
    if (j.is_null()) return o;
    for (const auto& [key, _] : j.items())
      if (key != "c0" && key != "barrier_c" && key != "replay_coef" && key != "block_coef")
        throw ConfigError("unknown constants_override field '" + key + "'");
    if (j.contains("c0")) o.c0 = j["c0"].get<double>();
    if (j.contains("barrier_c")) o.barrier_c = j["barrier_c"].get<double>();
    if (j.contains("replay_coef")) o.replay_coef = j["replay_coef"].get<double>();
    if (j.contains("block_coef")) o.block_coef = j["block_coef"].get<double>();
    return o;
  }
};

// Desk-scale preset: C0 = L_max / (4m) so the base block length is L_max, with
// restart-test coefficients scaled down so that a constant-size mean shift is
// detectable within a few thousand rounds.
inline AdaOverrides desk_scale_overrides(int m, Round max_block = 64, double test_scale = 1.0 / 60.0) {
  AdaOverrides o;
  o.c0 = static_cast<double>(max_block) / (4.0 * m);
  o.replay_coef = 34.0 * test_scale;
  o.block_coef = 20.0 * test_scale;
  return o;
}

struct AdaConstants {
  int m = 0;
  int K = 0;
  Round T = 0;
  double delta = 0.0;
  double space_size = 0.0;
  double c0 = 0.0;
  Round L = 0;
  double barrier_c = 100.0;
  double replay_coef = 34.0;
  double block_coef = 20.0;
  LogBase log_base = LogBase::natural;

  // nu_j = sqrt(C0 / (m 2^j L))
  double nu(int j) const {
    return std::sqrt(c0 / (static_cast<double>(m) * std::ldexp(1.0, j) * static_cast<double>(L)));
  }
  double log_T() const {
    const double t = static_cast<double>(T);
    return log_base == LogBase::natural ? std::log(t) : std::log2(t);
  }
  double replay_threshold(int n) const { return replay_coef * m * K * nu(n) * log_T(); }
  double block_threshold(int k) const { return block_coef * m * K * nu(k) * log_T(); }
  Round block_end(Round epoch_start, int j) const {
    return epoch_start + (Round{1} << j) * L - 1;
  }

  nlohmann::json to_json() const {
    return {{"C0", c0},           {"L", L},
            {"C", barrier_c},     {"replay_coef", replay_coef},
            {"block_coef", block_coef}, {"log_base", log_base == LogBase::natural ? "e" : "2"},
            {"nu0", nu(0)},       {"space_size", space_size}};
  }
};

// C0 = ln(8 T^3 |S|^2 / delta), L = ceil(4 m C0), C = 100.
inline AdaConstants make_ada_constants(double delta, Round T, const ActionSpace& space,
                                       const AdaOverrides& overrides = {},
                                       LogBase log_base = LogBase::natural) {
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must be in (0,1)");
  if (T < 2) throw ConfigError("Ada-LCMAB needs T >= 2");
  AdaConstants c;
  c.m = space.m();
  c.K = space.k_max();
  c.T = T;
  c.delta = delta;
  c.space_size = space.size();
  const double Td = static_cast<double>(T);
  c.c0 = overrides.c0.value_or(std::log(8.0) + 3.0 * std::log(Td) + 2.0 * std::log(c.space_size) -
                               std::log(delta));
  if (!(c.c0 > 0.0)) throw ConfigError("C0 must be positive");
  c.L = static_cast<Round>(std::ceil(4.0 * c.m * c.c0));
  c.barrier_c = overrides.barrier_c.value_or(100.0);
  c.replay_coef = overrides.replay_coef.value_or(34.0);
  c.block_coef = overrides.block_coef.value_or(20.0);
  c.log_base = log_base;
  return c;
}

// Empirical mean over an interval and its best action.
struct IntervalStats {
  std::vector<double> mean;
  Action best;
  double best_value = 0.0;

  double regret(const Action& S) const { return best_value - linear_value(S, mean); }
};

inline IntervalStats make_interval_stats(std::vector<double> mean, const ActionSpace& space) {
  IntervalStats s;
  s.best = signed_linear_oracle(mean, space);
  s.best_value = linear_value(s.best, mean);
  s.mean = std::move(mean);
  return s;
}

// Largest value over S of Reg_a(S) - 4 Reg_b(S):
//   a* - 4 b* + max_S <4 mu_b - mu_a, 1_S>,
// one signed-oracle call.
inline double max_regret_excess(const IntervalStats& a, const IntervalStats& b, const ActionSpace& space) {
  std::vector<double> w(a.mean.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = 4.0 * b.mean[i] - a.mean[i];
  return a.best_value - 4.0 * b.best_value + signed_linear_max(w, space);
}

struct RestartTestResult {
  bool fail = false;
  double margin = 0.0;  // largest left side minus its threshold
};

inline RestartTestResult pairwise_test(const IntervalStats& a, const IntervalStats& b, double threshold,
                                       const ActionSpace& space) {
  const double lhs = std::max(max_regret_excess(a, b, space), max_regret_excess(b, a, space));
  return {lhs >= threshold, lhs - threshold};
}

// Fails when some S has Reg_A(S) - 4 Reg_B(S) or Reg_B(S) - 4 Reg_A(S)
// at or above the replay threshold for index n, B being the previous block.
inline RestartTestResult end_of_replay_test(const IntervalStats& replay, const IntervalStats& previous_block,
                                            int n, const AdaConstants& c, const ActionSpace& space) {
  return pairwise_test(replay, previous_block, c.replay_threshold(n), space);
}

// Compares the just-finished block against every earlier block k < j of the
// epoch with the block threshold for index k.
inline RestartTestResult end_of_block_test(const IntervalStats& block, std::span<const IntervalStats> earlier,
                                           const AdaConstants& c, const ActionSpace& space) {
  RestartTestResult out{false, -std::numeric_limits<double>::infinity()};
  for (std::size_t k = 0; k < earlier.size(); ++k) {
    const auto r = pairwise_test(block, earlier[k], c.block_threshold(static_cast<int>(k)), space);
    out.margin = std::max(out.margin, r.margin);
    out.fail = out.fail || r.fail;
  }
  return out;
}

struct ReplayRecord {
  int n = 0;
  Round start = 0;
  Round end = 0;
};

// (1/L) 2^{-j/2} sum_{k<j} 2^{-k/2}; zero for j = 0.
inline double replay_probability(int j, Round L) {
  double s = 0.0;
  for (int k = 0; k < j; ++k) s += std::pow(2.0, -0.5 * k);
  return s * std::pow(2.0, -0.5 * j) / static_cast<double>(L);
}

inline std::optional<ReplayRecord> schedule_replay(Round t, int j, Round L, Rng& rng) {
  if (j == 0) return std::nullopt;
  if (!bernoulli(rng, replay_probability(j, L))) return std::nullopt;
  std::vector<double> w(static_cast<std::size_t>(j));
  for (int b = 0; b < j; ++b) w[static_cast<std::size_t>(b)] = std::pow(2.0, -0.5 * b);
  const int n = static_cast<int>(categorical(rng, w));
  return ReplayRecord{n, t, t + (Round{1} << n) * L - 1};
}

// Importance-weighted estimate: X_i / q_i on played arms, zero elsewhere.
inline std::vector<double> importance_estimate(const Action& played, std::span<const Observation> observations,
                                               std::span<const double> q) {
  std::vector<double> mu(q.size(), 0.0);
  for (const auto& o : observations) {
    if (!contains(played, o.arm))
      throw ContractError("observation for arm " + std::to_string(o.arm) + " outside the played action");
    const double qi = q[static_cast<std::size_t>(o.arm)];
    if (!(qi > 0.0)) throw ContractError("importance weight with nonpositive marginal");
    mu[static_cast<std::size_t>(o.arm)] = o.value / qi;
  }
  return mu;
}

struct RestartEvent {
  Round round = 0;
  std::string cause;  // "replay" or "block"
  int epoch = 0;
  int block = 0;
};

// Adaptive restarting learner for linear semi-bandits with exact oracle.
// Epochs are split into doubling blocks; each block plays the log-barrier
// FTRL distribution fitted on the previous block, random replay phases re-run
// earlier blocks' distributions, and two families of empirical-regret tests
// trigger a restart when the data stop looking stationary.
class AdaLcmab final : public Policy {
 public:
  AdaLcmab(ActionSpace space, AdaConstants constants, Rng rng)
      : space_(std::move(space)), c_(constants), rng_(rng) {
    if (c_.m != space_.m()) throw ConfigError("constants built for a different arm count");
    begin_epoch(1);
  }

  Action act(Round t) override {
    if (t != next_round_) throw ContractError("Ada-LCMAB rounds must be consecutive");
    if (auto rec = schedule_replay(t, j_, c_.L, rng_)) replays_.push_back(*rec);
    active_.clear();
    for (const auto& r : replays_)
      if (r.start <= t && t <= r.end && !contains_index(active_, r.n)) active_.push_back(r.n);
    std::sort(active_.begin(), active_.end());
    if (active_.empty()) {
      played_ = solutions_[static_cast<std::size_t>(j_)].distribution.sample(rng_);
      q_t_ = solutions_[static_cast<std::size_t>(j_)].q;
    } else {
      const int n = active_[uniform_index(rng_, active_.size())];
      played_ = solutions_[static_cast<std::size_t>(n)].distribution.sample(rng_);
      q_t_.assign(static_cast<std::size_t>(c_.m), 0.0);
      for (int k : active_)
        for (std::size_t i = 0; i < q_t_.size(); ++i)
          q_t_[i] += solutions_[static_cast<std::size_t>(k)].q[i] / static_cast<double>(active_.size());
    }
    return played_;
  }

  void observe(Round t, const RoundOutcome& feedback) override {
    check_feedback(played_, feedback);
    const auto mu = importance_estimate(played_, feedback.observations, q_t_);
    const std::size_t base = prefix_.size() - static_cast<std::size_t>(c_.m);
    for (std::size_t i = 0; i < mu.size(); ++i) prefix_.push_back(prefix_[base + i] + mu[i]);
    next_round_ = t + 1;

    for (const auto& r : replays_) {
      if (r.end != t) continue;
      const auto res = end_of_replay_test(stats(r.start, t), stats(iota_, c_.block_end(iota_, j_ - 1)), r.n, c_,
                                          space_);
      last_replay_margin_ = res.margin;
      ++replay_tests_;
      if (res.fail) {
        restart(t, "replay");
        return;
      }
    }
    if (t == c_.block_end(iota_, j_)) {
      std::vector<IntervalStats> earlier;
      for (int k = 0; k < j_; ++k) earlier.push_back(stats(iota_, c_.block_end(iota_, k)));
      const auto res = end_of_block_test(stats(iota_, t), earlier, c_, space_);
      last_block_margin_ = j_ > 0 ? res.margin : 0.0;
      if (res.fail) {
        restart(t, "block");
        return;
      }
      begin_block(j_ + 1);
    }
  }

  nlohmann::json snapshot() const override {
    auto reps = nlohmann::json::array();
    for (const auto& r : replays_) reps.push_back({{"n", r.n}, {"start", r.start}, {"end", r.end}});
    auto rs = nlohmann::json::array();
    for (const auto& r : restarts_) rs.push_back({{"round", r.round}, {"cause", r.cause}, {"epoch", r.epoch}, {"block", r.block}});
    return {{"policy", name()},
            {"epoch", epoch_},
            {"epoch_start", iota_},
            {"block", j_},
            {"replays", reps},
            {"active_replays", active_},
            {"last_replay_margin", last_replay_margin_},
            {"last_block_margin", last_block_margin_},
            {"replay_tests", replay_tests_},
            {"restarts", rs},
            {"constants", c_.to_json()}};
  }

  std::string name() const override { return "ada_lcmab"; }

  const AdaConstants& constants() const { return c_; }
  int epoch() const { return epoch_; }
  int block() const { return j_; }
  Round epoch_start() const { return iota_; }
  const std::vector<RestartEvent>& restarts() const { return restarts_; }
  const std::vector<ReplayRecord>& replays() const { return replays_; }
  const std::vector<int>& active_replays() const { return active_; }
  std::span<const double> played_marginals() const { return q_t_; }
  const FtrlSolution& block_solution(int k) const { return solutions_.at(static_cast<std::size_t>(k)); }

  // Empirical mean over [s, e] within the current epoch.
  IntervalStats stats(Round s, Round e) const {
    if (s < iota_ || e < s || e >= next_round_) throw BoundsError("interval outside the observed epoch");
    const auto m = static_cast<std::size_t>(c_.m);
    const auto hi = static_cast<std::size_t>(e - iota_ + 1) * m;
    const auto lo = static_cast<std::size_t>(s - iota_) * m;
    std::vector<double> mean(m);
    const double len = static_cast<double>(e - s + 1);
    for (std::size_t i = 0; i < m; ++i) mean[i] = (prefix_[hi + i] - prefix_[lo + i]) / len;
    return make_interval_stats(std::move(mean), space_);
  }

 private:
  static bool contains_index(const std::vector<int>& v, int x) {
    return std::find(v.begin(), v.end(), x) != v.end();
  }

  void begin_epoch(Round t) {
    ++epoch_;
    iota_ = t;
    next_round_ = t;
    prefix_.assign(static_cast<std::size_t>(c_.m), 0.0);
    solutions_.clear();
    begin_block(0);
  }

  void begin_block(int j) {
    j_ = j;
    replays_.clear();
    if (j == 0) {
      // Barrier-only problem: the analytic center of Conv(S)_nu0.
      const std::vector<double> zero(static_cast<std::size_t>(c_.m), 0.0);
      solutions_.push_back(ftrl_solve(zero, c_.nu(0), space_, c_.barrier_c));
      return;
    }
    const auto prev = stats(iota_, c_.block_end(iota_, j - 1));
    const double nu = c_.nu(j);
    auto sol = ftrl_solve(prev.mean, nu, space_, c_.barrier_c);
    const auto slack = ftrl_lemma_slack(prev.mean, nu, c_.barrier_c, space_, sol);
    if (slack.regret < -1e-6 || slack.variance < -1e-6)
      throw NumericalError("FTRL solution violates its regret/variance guarantees (slack " +
                           std::to_string(slack.regret) + ", " + std::to_string(slack.variance) + ")");
    solutions_.push_back(std::move(sol));
  }

  void restart(Round t, std::string cause) {
    restarts_.push_back({t, std::move(cause), epoch_, j_});
    begin_epoch(t + 1);
  }

  ActionSpace space_;
  AdaConstants c_;
  Rng rng_;
  int epoch_ = 0;
  Round iota_ = 1;
  Round next_round_ = 1;
  int j_ = 0;
  std::vector<FtrlSolution> solutions_;
  std::vector<ReplayRecord> replays_;
  std::vector<int> active_;
  std::vector<double> prefix_;
  Action played_;
  std::vector<double> q_t_;
  double last_replay_margin_ = 0.0;
  double last_block_margin_ = 0.0;
  std::int64_t replay_tests_ = 0;
  std::vector<RestartEvent> restarts_;
};

}  // namespace nscmab
