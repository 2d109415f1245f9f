#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "core.hpp"
#include "env.hpp"
#include "rng.hpp"

namespace nscmab {

inline constexpr std::size_t kDefaultEnumerationCap = std::size_t{1} << 20;

inline double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  k = std::min(k, n - k);
  double c = 1.0;
  for (int i = 1; i <= k; ++i) c = c * static_cast<double>(n - k + i) / static_cast<double>(i);
  return std::round(c);
}

inline bool lex_less(const Action& a, const Action& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

// The feasible super arms: either an explicit list or every K-subset of [m]
// (stored implicitly, materialized only below a cap).
class ActionSpace {
 public:
  enum class Kind { enumerated, top_k };

  static ActionSpace enumerated(int m, std::vector<Action> actions) {
    if (actions.empty()) throw ConfigError("enumerated action space is empty");
    ActionSpace s;
    s.kind_ = Kind::enumerated;
    s.m_ = m;
    for (const auto& a : actions) {
      validate_action(a, m);
      s.k_max_ = std::max(s.k_max_, static_cast<int>(a.size()));
    }
    s.actions_ = std::move(actions);
    return s;
  }

  static ActionSpace top_k(int m, int K, std::size_t cap = kDefaultEnumerationCap) {
    if (m < 1 || K < 1 || K > m) throw ConfigError("top_k needs 1 <= K <= m");
    ActionSpace s;
    s.kind_ = Kind::top_k;
    s.m_ = m;
    s.k_max_ = K;
    s.cap_ = cap;
    return s;
  }

  Kind kind() const { return kind_; }
  int m() const { return m_; }
  // Largest number of arms one action can trigger.
  int k_max() const { return k_max_; }
  double size() const {
    return kind_ == Kind::enumerated ? static_cast<double>(actions_.size()) : binomial(m_, k_max_);
  }
  bool enumerable() const { return size() <= static_cast<double>(cap_); }

  // All actions; top_k subsets come out in lexicographic order.
  std::vector<Action> enumerate() const {
    if (kind_ == Kind::enumerated) return actions_;
    if (!enumerable())
      throw UnsupportedError("top_k space of size " + std::to_string(size()) +
                             " exceeds enumeration cap");
    std::vector<Action> out;
    Action cur(static_cast<std::size_t>(k_max_));
    std::iota(cur.begin(), cur.end(), 0);
    while (true) {
      out.push_back(cur);
      int i = k_max_ - 1;
      while (i >= 0 && cur[static_cast<std::size_t>(i)] == m_ - k_max_ + i) --i;
      if (i < 0) break;
      ++cur[static_cast<std::size_t>(i)];
      for (int j = i + 1; j < k_max_; ++j)
        cur[static_cast<std::size_t>(j)] = cur[static_cast<std::size_t>(j - 1)] + 1;
    }
    return out;
  }

  const std::vector<Action>& actions() const { return actions_; }

  nlohmann::json to_json() const {
    if (kind_ == Kind::top_k) return {{"kind", "top_k"}, {"m", m_}, {"K", k_max_}};
    return {{"kind", "enumerated"}, {"m", m_}, {"actions", actions_}};
  }

 private:
  ActionSpace() = default;
  Kind kind_ = Kind::enumerated;
  int m_ = 0;
  int k_max_ = 0;
  std::size_t cap_ = kDefaultEnumerationCap;
  std::vector<Action> actions_;
};

// K largest weights; ties go to the smaller index, which makes the result the
// lexicographically smallest maximizer. Returned sorted ascending.
inline Action top_k_indices(std::span<const double> weights, int K) {
  Action idx(weights.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](Arm a, Arm b) {
    return weights[static_cast<std::size_t>(a)] > weights[static_cast<std::size_t>(b)];
  });
  idx.resize(static_cast<std::size_t>(K));
  std::sort(idx.begin(), idx.end());
  return idx;
}

namespace detail {

template <class Score>
Action scan_argmax(const std::vector<Action>& actions, Score&& score) {
  const Action* best = nullptr;
  double best_value = 0.0;
  for (const auto& a : actions) {
    const double v = score(a);
    if (best == nullptr || v > best_value || (v == best_value && lex_less(a, *best))) {
      best = &a;
      best_value = v;
    }
  }
  return *best;
}

}  // namespace detail

inline double linear_value(const Action& action, std::span<const double> weights) {
  double s = 0.0;
  for (Arm a : action) s += weights[static_cast<std::size_t>(a)];
  return s;
}

// argmax_S r_S(weights). Both reward kinds are monotone in adding larger
// weights, so top_k reduces to the K largest.
inline Action exact_oracle(std::span<const double> weights, const ActionSpace& space,
                           const RewardModel& reward) {
  if (space.kind() == ActionSpace::Kind::top_k) return top_k_indices(weights, space.k_max());
  return detail::scan_argmax(space.actions(),
                             [&](const Action& a) { return expected_reward(a, weights, reward); });
}

// argmax_S sum_{i in S} weights_i for weights of any sign.
inline Action signed_linear_oracle(std::span<const double> weights, const ActionSpace& space) {
  if (space.kind() == ActionSpace::Kind::top_k) return top_k_indices(weights, space.k_max());
  return detail::scan_argmax(space.actions(),
                             [&](const Action& a) { return linear_value(a, weights); });
}

inline double signed_linear_max(std::span<const double> weights, const ActionSpace& space) {
  return linear_value(signed_linear_oracle(weights, space), weights);
}

struct OracleSpec {
  double alpha = 1.0;
  double beta = 1.0;

  void validate() const {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("oracle alpha must be in (0,1]");
    if (!(beta > 0.0 && beta <= 1.0)) throw ConfigError("oracle beta must be in (0,1]");
  }
  bool is_exact() const { return alpha == 1.0 && beta == 1.0; }
};

inline Action uniform_random_action(const ActionSpace& space, Rng& rng) {
  if (space.kind() == ActionSpace::Kind::enumerated)
    return space.actions()[uniform_index(rng, space.actions().size())];
  Action pool(static_cast<std::size_t>(space.m()));
  std::iota(pool.begin(), pool.end(), 0);
  for (int k = 0; k < space.k_max(); ++k) {
    const auto j = static_cast<std::size_t>(k) +
                   uniform_index(rng, static_cast<std::uint64_t>(space.m() - k));
    std::swap(pool[static_cast<std::size_t>(k)], pool[j]);
  }
  pool.resize(static_cast<std::size_t>(space.k_max()));
  std::sort(pool.begin(), pool.end());
  return pool;
}

// An (alpha, beta)-approximation oracle built on top of the exact one.
//
// With probability beta it answers from a fixed random half of the action
// space (exact answer when alpha = 1), falling back to the exact argmax if the
// half's best is not alpha-good for the given weights; with probability
// 1 - beta it answers with a uniformly random action. The half is redrawn at
// construction until it holds an alpha-good action for a set of probe weight
// vectors.
class DegradedOracle {
 public:
  DegradedOracle(OracleSpec spec, ActionSpace space, RewardModel reward, Rng& construction_rng,
                 int probes = 32, int max_retries = 100)
      : spec_(spec), space_(std::move(space)), reward_(reward) {
    spec_.validate();
    if (spec_.alpha >= 1.0) return;
    auto all = space_.enumerate();
    if (all.size() < 2) {
      restricted_ = all;
      return;
    }
    std::vector<std::vector<double>> probe_weights;
    probe_weights.emplace_back(static_cast<std::size_t>(space_.m()), 1.0);
    for (int p = 0; p < probes; ++p) probe_weights.push_back(uniform_means(construction_rng, space_.m()));
    for (int attempt = 0; attempt < max_retries; ++attempt) {
      auto shuffled = all;
      for (std::size_t k = shuffled.size() - 1; k > 0; --k)
        std::swap(shuffled[k], shuffled[uniform_index(construction_rng, k + 1)]);
      shuffled.resize((shuffled.size() + 1) / 2);
      const auto half = ActionSpace::enumerated(space_.m(), shuffled);
      bool ok = true;
      for (const auto& w : probe_weights) {
        if (!alpha_good(exact_oracle(w, half, reward_), w)) {
          ok = false;
          break;
        }
      }
      if (ok) {
        restricted_ = std::move(shuffled);
        return;
      }
    }
    throw ConfigError("no alpha-good restricted action set found after " +
                      std::to_string(max_retries) + " retries");
  }

  const OracleSpec& spec() const { return spec_; }
  const ActionSpace& space() const { return space_; }

  Action operator()(std::span<const double> weights, Rng& rng) const {
    if (spec_.beta < 1.0 && !bernoulli(rng, spec_.beta)) return uniform_random_action(space_, rng);
    if (spec_.alpha >= 1.0) return exact_oracle(weights, space_, reward_);
    auto candidate = detail::scan_argmax(
        restricted_, [&](const Action& a) { return expected_reward(a, weights, reward_); });
    if (alpha_good(candidate, weights)) return candidate;
    return exact_oracle(weights, space_, reward_);
  }

 private:
  bool alpha_good(const Action& a, std::span<const double> w) const {
    const double opt = expected_reward(exact_oracle(w, space_, reward_), w, reward_);
    return expected_reward(a, w, reward_) >= spec_.alpha * opt;
  }

  OracleSpec spec_;
  ActionSpace space_;
  RewardModel reward_;
  std::vector<Action> restricted_;
};

// What the policies call: weights in, super arm out.
using OracleFn = std::function<Action(std::span<const double>)>;

inline OracleFn make_exact_oracle(ActionSpace space, RewardModel reward) {
  return [space = std::move(space), reward](std::span<const double> w) {
    return exact_oracle(w, space, reward);
  };
}

}  // namespace nscmab
