#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "core.hpp"
#include "rng.hpp"

namespace nscmab {

struct Exp3pParams {
  double eta = 0.0;
  double gamma = 0.0;
  double beta = 0.0;  // gain-estimate bias, unrelated to the oracle's beta
};

// Standard tuning for K arms over T rounds with gains in [0,1].
inline Exp3pParams exp3p_params(int K, std::int64_t T) {
  if (K < 2) throw ConfigError("EXP3.P tuning needs K >= 2");
  if (T < 1) throw ConfigError("EXP3.P tuning needs T >= 1");
  const double k = static_cast<double>(K), t = static_cast<double>(T), lk = std::log(k);
  return {0.95 * std::sqrt(lk / (t * k)), std::min(1.0, 1.05 * std::sqrt(k * lk / t)),
          std::sqrt(lk / (k * t))};
}

class Exp3p {
 public:
  Exp3p(int K, Exp3pParams params)
      : params_(params), gains_(static_cast<std::size_t>(K), 0.0),
        probs_(static_cast<std::size_t>(K), 1.0 / K) {
    if (K < 1) throw ConfigError("EXP3.P needs at least one arm");
  }

  // A single arm needs no tuning; everything else uses exp3p_params.
  Exp3p(int K, std::int64_t T) : Exp3p(K, K >= 2 ? exp3p_params(K, T) : Exp3pParams{}) {}

  int arms() const { return static_cast<int>(probs_.size()); }
  const Exp3pParams& params() const { return params_; }
  std::span<const double> probabilities() const { return probs_; }
  std::span<const double> estimated_gains() const { return gains_; }

  int select(Rng& rng) const { return static_cast<int>(categorical(rng, probs_)); }

  void update(int arm, double reward) {
    if (arm < 0 || arm >= arms()) throw ContractError("EXP3.P arm out of range");
    if (!(reward >= 0.0 && reward <= 1.0))
      throw ContractError("EXP3.P reward " + std::to_string(reward) + " outside [0,1]");
    for (std::size_t i = 0; i < probs_.size(); ++i) {
      const double g = static_cast<int>(i) == arm ? reward : 0.0;
      gains_[i] += (g + params_.beta) / probs_[i];
    }
    const double top = *std::max_element(gains_.begin(), gains_.end());
    double z = 0.0;
    for (std::size_t i = 0; i < probs_.size(); ++i) {
      probs_[i] = std::exp(params_.eta * (gains_[i] - top));
      z += probs_[i];
    }
    const double k = static_cast<double>(probs_.size());
    for (auto& p : probs_) p = (1.0 - params_.gamma) * p / z + params_.gamma / k;
  }

 private:
  Exp3pParams params_;
  std::vector<double> gains_;
  std::vector<double> probs_;
};

}  // namespace nscmab
