#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "core.hpp"
#include "cucb_sw.hpp"
#include "exp3p.hpp"
#include "policy.hpp"
#include "rng.hpp"

namespace nscmab {

// floor(log2 L): the master bandit has arms 0..k with window 2^i.
inline int window_exponent(Round L) {
  int k = 0;
  while ((Round{2} << k) <= L) ++k;
  return k;
}

// Bandit-over-bandit: blocks of length L, each running a fresh CUCB-SW whose
// window 2^i is drawn by an EXP3.P master over i = 0..k. At block end the
// master receives the block's realized reward normalized per round,
// (R(l) - len R1) / (len (R2 - R1)), which lies in [0,1].
class CucbBob final : public Policy {
 public:
  CucbBob(int m, Round horizon, Round block_length, double r1, double r2, OracleFn oracle, Rng rng)
      : m_(m), horizon_(horizon), block_length_(block_length), r1_(r1), r2_(r2),
        oracle_(std::move(oracle)), rng_(rng),
        master_(window_exponent(block_length) + 1, (horizon + block_length - 1) / block_length) {
    if (block_length < 1 || block_length > horizon) throw ConfigError("block length must be in [1, T]");
    if (!(r2 > r1)) throw ConfigError("BoB needs R2 > R1");
  }

  Action act(Round t) override {
    if ((t - 1) % block_length_ == 0) start_block(t);
    return inner_->act(t);
  }

  void observe(Round t, const RoundOutcome& feedback) override {
    inner_->observe(t, feedback);
    block_reward_ += feedback.realized_reward;
    if (t == block_end_) finish_block();
  }

  nlohmann::json snapshot() const override {
    const auto p = master_.probabilities();
    return {{"policy", name()},
            {"block_length", block_length_},
            {"master_probabilities", std::vector<double>(p.begin(), p.end())},
            {"block_windows", block_windows_},
            {"block_feeds", feeds_}};
  }

  std::string name() const override { return "cucb_bob"; }

  const Exp3p& master() const { return master_; }
  const CucbSw* inner() const { return inner_.get(); }
  const std::vector<Round>& block_windows() const { return block_windows_; }
  const std::vector<double>& feeds() const { return feeds_; }

 private:
  void start_block(Round t) {
    arm_ = master_.select(rng_);
    const Round window = Round{1} << arm_;
    block_windows_.push_back(window);
    inner_ = std::make_unique<CucbSw>(m_, window, horizon_, oracle_);
    block_start_ = t;
    block_end_ = std::min(t + block_length_ - 1, horizon_);
    block_reward_ = 0.0;
  }

  void finish_block() {
    const double len = static_cast<double>(block_end_ - block_start_ + 1);
    const double feed = (block_reward_ - len * r1_) / (len * (r2_ - r1_));
    if (feed < -1e-12 || feed > 1.0 + 1e-12)
      throw ConfigError("block reward " + std::to_string(block_reward_) + " outside [" +
                        std::to_string(len * r1_) + ", " + std::to_string(len * r2_) +
                        "]; R1/R2 do not bound the environment's rewards");
    feeds_.push_back(feed);
    master_.update(arm_, std::clamp(feed, 0.0, 1.0));
  }

  int m_;
  Round horizon_;
  Round block_length_;
  double r1_, r2_;
  OracleFn oracle_;
  Rng rng_;
  Exp3p master_;
  std::unique_ptr<CucbSw> inner_;
  int arm_ = 0;
  Round block_start_ = 0, block_end_ = 0;
  double block_reward_ = 0.0;
  std::vector<Round> block_windows_;
  std::vector<double> feeds_;
};

// indep: sqrt(m K T) / R; dep: K^(2/3) T^(1/3). Rounded, clamped to [1, T].
inline Round recommended_block(Round T, int m, int K, double R, BoundMode mode) {
  if (T < 1 || m < 1 || K < 1) throw ConfigError("recommended_block needs T, m, K >= 1");
  if (!(R > 0.0)) throw ConfigError("recommended_block needs R > 0");
  const double Td = static_cast<double>(T);
  const double L = mode == BoundMode::indep
                       ? std::sqrt(static_cast<double>(m) * K * Td) / R
                       : std::pow(static_cast<double>(K), 2.0 / 3.0) * std::cbrt(Td);
  return std::clamp<Round>(std::llround(L), 1, T);
}

}  // namespace nscmab
