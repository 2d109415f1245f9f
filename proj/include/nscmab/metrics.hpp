#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "core.hpp"
#include "env.hpp"
#include "oracles.hpp"

namespace nscmab {

struct RegretRecord {
  Round t = 0;
  double opt = 0.0;
  double reward = 0.0;  // expected reward r_{S_t}(mu_t)
  double instantaneous = 0.0;
  double cumulative = 0.0;
};

// Per-round (alpha, beta)-regret alpha*beta*opt_t - r_{S_t}(mu_t) using
// expected rewards; realized rewards are kept alongside for diagnostics.
class RegretLedger {
 public:
  RegretLedger(std::uint64_t seed, double alpha = 1.0, double beta = 1.0)
      : seed_(seed), alpha_(alpha), beta_(beta) {}

  const RegretRecord& record(Round t, std::span<const double> mu, const Action& action,
                             const RewardModel& reward, const ActionSpace& space) {
    if (cached_mu_.size() != mu.size() || !std::equal(mu.begin(), mu.end(), cached_mu_.begin())) {
      cached_mu_.assign(mu.begin(), mu.end());
      cached_opt_ = expected_reward(exact_oracle(mu, space, reward), mu, reward);
    }
    return record_values(t, cached_opt_, expected_reward(action, mu, reward));
  }

  const RegretRecord& record_values(Round t, double opt, double reward) {
    RegretRecord r;
    r.t = t;
    r.opt = opt;
    r.reward = reward;
    r.instantaneous = alpha_ * beta_ * opt - reward;
    r.cumulative = (records_.empty() ? 0.0 : records_.back().cumulative) + r.instantaneous;
    records_.push_back(r);
    return records_.back();
  }

  void record_realized(double realized) { realized_.push_back(realized); }

  std::uint64_t seed() const { return seed_; }
  double alpha() const { return alpha_; }
  double beta() const { return beta_; }
  const std::vector<RegretRecord>& records() const { return records_; }
  const std::vector<double>& realized() const { return realized_; }
  double cumulative() const { return records_.empty() ? 0.0 : records_.back().cumulative; }

  static constexpr const char* csv_header = "seed,t,opt,reward,inst_regret,cum_regret";

  // %.17g round-trips doubles, so the CSV is an exact record.
  std::string to_csv() const {
    std::string out = csv_header;
    out += '\n';
    char buf[256];
    for (const auto& r : records_) {
      std::snprintf(buf, sizeof buf, "%llu,%lld,%.17g,%.17g,%.17g,%.17g\n",
                    static_cast<unsigned long long>(seed_), static_cast<long long>(r.t), r.opt, r.reward,
                    r.instantaneous, r.cumulative);
      out += buf;
    }
    return out;
  }

 private:
  std::uint64_t seed_;
  double alpha_, beta_;
  std::vector<RegretRecord> records_;
  std::vector<double> realized_;
  std::vector<double> cached_mu_;
  double cached_opt_ = 0.0;
};

struct ArmGaps {
  std::vector<double> min;  // +inf where undefined
  std::vector<double> max;  // 0 where undefined
};

// Per-arm minimum and maximum positive gap alpha*opt - r_S over actions that
// trigger the arm with positive probability, taken over every distinct mean
// vector of the schedule.
inline ArmGaps gap_report(const EnvSchedule& schedule, const ActionSpace& space, const RewardModel& reward,
                          const TriggeringModel& trig, double alpha = 1.0) {
  if (!space.enumerable()) throw UnsupportedError("gap_report needs an enumerable action space");
  const auto actions = space.enumerate();
  const auto m = static_cast<std::size_t>(schedule.m());
  ArmGaps g{std::vector<double>(m, std::numeric_limits<double>::infinity()), std::vector<double>(m, 0.0)};
  for (std::size_t seg = 0; seg < schedule.segment_count(); ++seg) {
    const auto mu = schedule.segment_means(seg);
    double opt = -std::numeric_limits<double>::infinity();
    for (const auto& a : actions) opt = std::max(opt, expected_reward(a, mu, reward));
    for (const auto& a : actions) {
      const double gap = std::max(0.0, alpha * opt - expected_reward(a, mu, reward));
      if (!(gap > 0.0)) continue;
      const auto p = trigger_probabilities(a, mu, trig);
      for (std::size_t i = 0; i < m; ++i) {
        if (!(p[i] > 0.0)) continue;
        g.min[i] = std::min(g.min[i], gap);
        g.max[i] = std::max(g.max[i], gap);
      }
    }
  }
  return g;
}

}  // namespace nscmab
