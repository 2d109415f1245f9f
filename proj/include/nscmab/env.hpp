#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "core.hpp"
#include "rng.hpp"

namespace nscmab {

enum class Triggering { full, cascade };
enum class RewardKind { linear, disjunctive };

// full: every arm of the action is triggered.
// cascade: arms are examined in the action's listed order and examination
// stops after the first outcome 1.
struct TriggeringModel {
  Triggering kind = Triggering::full;
};

// linear: r_S(mu) = sum_{i in S} mu_i.
// disjunctive: r_S(mu) = 1 - prod_{i in S} (1 - mu_i).
// Both are 1-Lipschitz in the triggering-weighted l1 sense (B = 1).
struct RewardModel {
  RewardKind kind = RewardKind::linear;
  double smoothness_B() const { return 1.0; }
};

inline std::string to_string(Triggering t) { return t == Triggering::full ? "full" : "cascade"; }
inline std::string to_string(RewardKind r) { return r == RewardKind::linear ? "linear" : "disjunctive"; }

inline Triggering parse_triggering(const std::string& s) {
  if (s == "full") return Triggering::full;
  if (s == "cascade") return Triggering::cascade;
  throw ConfigError("unknown triggering '" + s + "'");
}

inline RewardKind parse_reward(const std::string& s) {
  if (s == "linear") return RewardKind::linear;
  if (s == "disjunctive") return RewardKind::disjunctive;
  throw ConfigError("unknown reward '" + s + "'");
}

// The realized reward of a linear model under cascade examination would sum
// only the examined prefix, whose expectation is not sum mu_i.
inline void check_compatible(const TriggeringModel& trig, const RewardModel& reward) {
  if (trig.kind == Triggering::cascade && reward.kind == RewardKind::linear)
    throw ConfigError("linear reward is not supported with cascade triggering");
}

inline double expected_reward(const Action& action, std::span<const double> mu,
                              const RewardModel& reward) {
  if (reward.kind == RewardKind::linear) {
    double s = 0.0;
    for (Arm a : action) s += mu[static_cast<std::size_t>(a)];
    return s;
  }
  double miss = 1.0;
  for (Arm a : action) miss *= 1.0 - mu[static_cast<std::size_t>(a)];
  return 1.0 - miss;
}

// p_i^{D,S}: probability that arm i is triggered when playing `action` under
// independent Bernoulli outcomes with means `mu`.
inline std::vector<double> trigger_probabilities(const Action& action, std::span<const double> mu,
                                                 const TriggeringModel& trig) {
  std::vector<double> p(mu.size(), 0.0);
  double reach = 1.0;
  for (Arm a : action) {
    const auto i = static_cast<std::size_t>(a);
    p[i] = trig.kind == Triggering::full ? 1.0 : reach;
    reach *= 1.0 - mu[i];
  }
  return p;
}

struct Observation {
  Arm arm;
  int value;
};

struct RoundOutcome {
  std::vector<Arm> triggered;
  std::vector<Observation> observations;
  double realized_reward = 0.0;
};

// Deterministic part of a round: given the full outcome vector X, work out
// which arms are triggered, what is observed, and the realized reward.
inline RoundOutcome resolve_round(const Action& action, std::span<const int> outcomes,
                                  const TriggeringModel& trig, const RewardModel& reward) {
  check_compatible(trig, reward);
  RoundOutcome out;
  for (Arm a : action) {
    const int x = outcomes[static_cast<std::size_t>(a)];
    out.triggered.push_back(a);
    out.observations.push_back({a, x});
    if (trig.kind == Triggering::cascade && x == 1) break;
  }
  if (reward.kind == RewardKind::linear) {
    for (const auto& o : out.observations) out.realized_reward += o.value;
  } else {
    bool hit = false;
    for (Arm a : action) hit = hit || outcomes[static_cast<std::size_t>(a)] == 1;
    out.realized_reward = hit ? 1.0 : 0.0;
  }
  return out;
}

struct SwitchingMeasures {
  std::int64_t switching = 1;          // number of stationary segments
  double variation = 0.0;              // sum of sup-norm mean steps
  double total_variation = 0.0;        // sum of TV distances between rounds
  bool total_variation_is_upper_bound = false;
};

// Largest number of simultaneously changing coordinates for which the TV
// distance of product Bernoulli measures is computed by enumeration.
inline constexpr int kExactTvMaxArms = 12;

// Non-stationary environment: a piecewise-constant table of mean vectors over
// rounds 1..T with independent Bernoulli outcomes. Immutable once built.
class EnvSchedule {
 public:
  struct Segment {
    Round start;
    std::vector<double> means;
  };

  EnvSchedule(int m, Round horizon, std::vector<Segment> segments, std::string kind = "explicit",
              nlohmann::json parameters = nlohmann::json::object(),
              std::optional<std::uint64_t> seed = std::nullopt)
      : m_(m), horizon_(horizon), kind_(std::move(kind)), parameters_(std::move(parameters)),
        seed_(seed) {
    if (m < 1) throw ConfigError("schedule needs m >= 1");
    if (horizon < 1) throw ConfigError("schedule needs horizon >= 1");
    if (segments.empty() || segments.front().start != 1)
      throw ConfigError("schedule segments must start at round 1");
    for (std::size_t k = 0; k < segments.size(); ++k) {
      auto& seg = segments[k];
      if (seg.means.size() != static_cast<std::size_t>(m))
        throw ConfigError("segment mean vector has wrong length");
      for (double v : seg.means)
        if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("mean outside [0,1]");
      if (k > 0 && seg.start <= segments[k - 1].start)
        throw ConfigError("segment starts must be strictly increasing");
      if (seg.start > horizon) throw ConfigError("segment starts after the horizon");
      // Merge repeats so change points are exactly the rounds where mu moves.
      if (!starts_.empty() && seg.means == last_means()) continue;
      starts_.push_back(seg.start);
      values_.insert(values_.end(), seg.means.begin(), seg.means.end());
    }
  }

  int m() const { return m_; }
  Round horizon() const { return horizon_; }
  const std::string& kind() const { return kind_; }
  const nlohmann::json& parameters() const { return parameters_; }
  std::optional<std::uint64_t> seed() const { return seed_; }
  EnvSchedule with_seed(std::optional<std::uint64_t> seed) const {
    EnvSchedule copy = *this;
    copy.seed_ = seed;
    return copy;
  }

  std::span<const double> means(Round t) const {
    if (t < 1 || t > horizon_)
      throw BoundsError("round " + std::to_string(t) + " outside [1, " +
                        std::to_string(horizon_) + "]");
    const auto it = std::upper_bound(starts_.begin(), starts_.end(), t);
    return segment_means(static_cast<std::size_t>(it - starts_.begin()) - 1);
  }

  // Rounds t >= 2 with mu_t != mu_{t-1}.
  std::vector<Round> change_points() const { return {starts_.begin() + 1, starts_.end()}; }

  std::size_t segment_count() const { return starts_.size(); }
  Round segment_start(std::size_t k) const { return starts_[k]; }
  std::span<const double> segment_means(std::size_t k) const {
    return {values_.data() + k * static_cast<std::size_t>(m_), static_cast<std::size_t>(m_)};
  }

  nlohmann::json to_json() const {
    nlohmann::json j{{"m", m_}, {"horizon", horizon_}, {"kind", kind_}, {"parameters", parameters_}};
    j["seed"] = seed_ ? nlohmann::json(*seed_) : nlohmann::json(nullptr);
    if (kind_ == "explicit") {
      auto segs = nlohmann::json::array();
      for (std::size_t k = 0; k < starts_.size(); ++k) {
        auto mu = segment_means(k);
        segs.push_back({{"start", starts_[k]}, {"means", std::vector<double>(mu.begin(), mu.end())}});
      }
      j["segments"] = segs;
    }
    return j;
  }

 private:
  std::vector<double> last_means() const {
    auto mu = segment_means(starts_.size() - 1);
    return {mu.begin(), mu.end()};
  }

  int m_;
  Round horizon_;
  std::string kind_;
  nlohmann::json parameters_;
  std::optional<std::uint64_t> seed_;
  std::vector<Round> starts_;
  std::vector<double> values_;
};

inline RoundOutcome sample_round(const EnvSchedule& schedule, Round t, const Action& action,
                                 const TriggeringModel& trig, const RewardModel& reward, Rng& rng) {
  const auto mu = schedule.means(t);
  validate_action(action, schedule.m());
  // Draw the whole outcome vector so the stream position does not depend on
  // how far a cascade gets.
  std::vector<int> x(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) x[i] = bernoulli(rng, mu[i]) ? 1 : 0;
  return resolve_round(action, x, trig, reward);
}

using MeanSampler = std::function<std::vector<double>(Rng&, int)>;

inline std::vector<double> uniform_means(Rng& rng, int m) {
  std::vector<double> mu(static_cast<std::size_t>(m));
  for (auto& v : mu) v = uniform01(rng);
  return mu;
}

inline double sup_distance(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

// Exactly `segments` stationary pieces; piece k starts at 1 + floor(k T / S).
inline EnvSchedule make_piecewise(int m, Round T, std::int64_t segments, const MeanSampler& sampler,
                                  double min_gap, Rng& rng, int max_retries = 1000) {
  if (segments < 1 || segments > T) throw ConfigError("piecewise needs 1 <= segments <= T");
  if (!(min_gap > 0.0 && min_gap < 1.0)) throw ConfigError("piecewise needs min_gap in (0,1)");
  std::vector<EnvSchedule::Segment> segs;
  for (std::int64_t k = 0; k < segments; ++k) {
    const Round start = 1 + (k * T) / segments;
    auto mu = sampler(rng, m);
    if (k > 0) {
      int tries = 0;
      while (sup_distance(mu, segs.back().means) < min_gap) {
        if (++tries > max_retries)
          throw GenerationError("could not meet min_gap " + std::to_string(min_gap) + " after " +
                                std::to_string(max_retries) + " retries");
        mu = sampler(rng, m);
      }
    }
    segs.push_back({start, std::move(mu)});
  }
  return EnvSchedule(m, T, std::move(segs), "piecewise",
                     {{"segments", segments}, {"min_gap", min_gap}});
}

// One coordinate follows a triangle wave whose per-round step is exactly
// V / (T - 1) and whose half-period is an integer number of steps, so every
// round moves the sup-norm by the same amount and the steps sum to V.
inline EnvSchedule make_drift(int m, Round T, double variation, Rng& rng) {
  if (!(variation >= 0.0)) throw ConfigError("drift needs variation >= 0");
  const auto coord = static_cast<std::size_t>(uniform_index(rng, static_cast<std::uint64_t>(m)));
  auto base = uniform_means(rng, m);
  const nlohmann::json params{{"variation", variation}};
  if (variation == 0.0) return EnvSchedule(m, T, {{1, base}}, "drift", params);
  if (T < 2) throw GenerationError("drift with positive variation needs T >= 2");
  const double step = variation / static_cast<double>(T - 1);
  if (step > 1.0)
    throw GenerationError("variation " + std::to_string(variation) +
                          " exceeds what [0,1] means can realize in " + std::to_string(T) +
                          " rounds");
  const auto half_period = static_cast<std::int64_t>(std::floor(1.0 / step));
  const double lo = (1.0 - static_cast<double>(half_period) * step) / 2.0;
  std::vector<EnvSchedule::Segment> segs;
  segs.reserve(static_cast<std::size_t>(T));
  for (Round t = 1; t <= T; ++t) {
    const std::int64_t phase = (t - 1) % (2 * half_period);
    const std::int64_t level = phase <= half_period ? phase : 2 * half_period - phase;
    auto mu = base;
    mu[coord] = std::clamp(lo + static_cast<double>(level) * step, 0.0, 1.0);
    segs.push_back({t, std::move(mu)});
  }
  return EnvSchedule(m, T, std::move(segs), "drift", params);
}

// TV distance between two product-Bernoulli laws. Coordinates that agree
// factor out, so only the changed ones are enumerated.
inline std::pair<double, bool> product_bernoulli_tv(std::span<const double> p,
                                                    std::span<const double> q) {
  std::vector<std::size_t> changed;
  double l1 = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] != q[i]) {
      changed.push_back(i);
      l1 += std::abs(p[i] - q[i]);
    }
  }
  if (changed.empty()) return {0.0, false};
  if (changed.size() > static_cast<std::size_t>(kExactTvMaxArms)) return {std::min(1.0, l1), true};
  const std::size_t n = changed.size();
  double sum = 0.0;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    double a = 1.0, b = 1.0;
    for (std::size_t k = 0; k < n; ++k) {
      const bool one = (mask >> k) & 1U;
      const double pi = p[changed[k]], qi = q[changed[k]];
      a *= one ? pi : 1.0 - pi;
      b *= one ? qi : 1.0 - qi;
    }
    sum += std::abs(a - b);
  }
  return {0.5 * sum, false};
}

inline SwitchingMeasures realized_measures(const EnvSchedule& schedule) {
  SwitchingMeasures out;
  out.switching = static_cast<std::int64_t>(schedule.segment_count());
  for (std::size_t k = 1; k < schedule.segment_count(); ++k) {
    const auto prev = schedule.segment_means(k - 1);
    const auto cur = schedule.segment_means(k);
    out.variation += sup_distance(prev, cur);
    const auto [tv, bound] = product_bernoulli_tv(prev, cur);
    out.total_variation += tv;
    out.total_variation_is_upper_bound = out.total_variation_is_upper_bound || bound;
  }
  return out;
}

inline nlohmann::json to_json(const SwitchingMeasures& s) {
  return {{"S", s.switching},
          {"V", s.variation},
          {"Vbar", s.total_variation},
          {"Vbar_is_upper_bound", s.total_variation_is_upper_bound}};
}

// Rebuild a schedule from its JSON description. Generated kinds are
// regenerated from their seed; explicit kinds carry their own segments.
inline EnvSchedule schedule_from_json(const nlohmann::json& j,
                                      std::optional<std::uint64_t> fallback_seed = std::nullopt) {
  const int m = j.at("m").get<int>();
  const Round T = j.at("horizon").get<Round>();
  const std::string kind = j.value("kind", "explicit");
  const nlohmann::json params = j.value("parameters", nlohmann::json::object());
  std::optional<std::uint64_t> seed = fallback_seed;
  if (j.contains("seed") && !j["seed"].is_null()) seed = j["seed"].get<std::uint64_t>();

  if (kind == "explicit") {
    std::vector<EnvSchedule::Segment> segs;
    if (j.contains("segments")) {
      for (const auto& s : j["segments"])
        segs.push_back({s.at("start").get<Round>(), s.at("means").get<std::vector<double>>()});
    } else if (j.contains("means")) {
      Round t = 1;
      for (const auto& row : j["means"]) segs.push_back({t++, row.get<std::vector<double>>()});
      if (t - 1 != T) throw ConfigError("explicit means table must have one row per round");
    } else {
      throw ConfigError("explicit schedule needs 'segments' or 'means'");
    }
    return EnvSchedule(m, T, std::move(segs), "explicit", params, seed);
  }
  if (!seed) throw ConfigError("generated schedule '" + kind + "' needs a seed");
  Rng rng = make_stream(*seed, 0);
  if (kind == "piecewise") {
    auto s = make_piecewise(m, T, params.at("segments").get<std::int64_t>(), uniform_means,
                            params.at("min_gap").get<double>(), rng);
    return s.with_seed(seed);
  }
  if (kind == "drift") {
    auto s = make_drift(m, T, params.at("variation").get<double>(), rng);
    return s.with_seed(seed);
  }
  throw ConfigError("unknown schedule kind '" + kind + "'");
}

}  // namespace nscmab
