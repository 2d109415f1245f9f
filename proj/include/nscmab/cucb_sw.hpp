#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "core.hpp"
#include "env.hpp"
#include "oracles.hpp"
#include "policy.hpp"

namespace nscmab {

// Per-arm ring buffers of (round, value) for triggered rounds. At round t the
// window covers rounds [max(t - w, 1), t - 1].
class SlidingWindowState {
 public:
  SlidingWindowState(int m, Round window, Round horizon)
      : window_(window), horizon_(horizon), buffers_(static_cast<std::size_t>(m)),
        sums_(static_cast<std::size_t>(m), 0.0) {
    if (m < 1) throw ConfigError("sliding window needs m >= 1");
    if (window < 1) throw ConfigError("window must be >= 1");
    if (horizon < 1) throw ConfigError("horizon must be >= 1");
  }

  int m() const { return static_cast<int>(buffers_.size()); }
  Round window() const { return window_; }
  Round horizon() const { return horizon_; }
  Round round() const { return t_; }

  void advance_to(Round t) {
    if (t < t_) throw ContractError("sliding window cannot move backwards");
    t_ = t;
    const Round oldest = t - window_;
    for (std::size_t i = 0; i < buffers_.size(); ++i) {
      auto& buf = buffers_[i];
      while (!buf.empty() && buf.front().round < oldest) {
        sums_[i] -= buf.front().value;
        buf.pop_front();
      }
      if (buf.empty()) sums_[i] = 0.0;
    }
  }

  void push(Arm arm, Round t, double value) {
    const auto i = static_cast<std::size_t>(arm);
    buffers_[i].push_back({t, value});
    sums_[i] += value;
  }

  std::int64_t count(Arm arm) const {
    return static_cast<std::int64_t>(buffers_[static_cast<std::size_t>(arm)].size());
  }

  // Windowed empirical mean; 1 when the arm has no sample in the window.
  double mean(Arm arm) const {
    const auto n = count(arm);
    return n == 0 ? 1.0 : sums_[static_cast<std::size_t>(arm)] / static_cast<double>(n);
  }

  double radius(Arm arm) const {
    const auto n = count(arm);
    if (n == 0) return std::numeric_limits<double>::infinity();
    return std::sqrt(3.0 * std::log(static_cast<double>(horizon_)) / (2.0 * static_cast<double>(n)));
  }

  std::vector<double> ucb_values() const {
    std::vector<double> out(buffers_.size());
    for (int i = 0; i < m(); ++i) {
      const double r = radius(i);
      out[static_cast<std::size_t>(i)] = std::isinf(r) ? 1.0 : std::min(mean(i) + r, 1.0);
    }
    return out;
  }

 private:
  struct Entry {
    Round round;
    double value;
  };
  Round window_;
  Round horizon_;
  Round t_ = 1;
  std::vector<std::deque<Entry>> buffers_;
  std::vector<double> sums_;
};

class CucbSw final : public Policy {
 public:
  CucbSw(int m, Round window, Round horizon, OracleFn oracle)
      : state_(m, window, horizon), oracle_(std::move(oracle)) {}

  Action act(Round t) override {
    state_.advance_to(t);
    last_action_ = oracle_(state_.ucb_values());
    return last_action_;
  }

  void observe(Round t, const RoundOutcome& feedback) override {
    check_feedback(last_action_, feedback);
    for (const auto& o : feedback.observations) state_.push(o.arm, t, o.value);
  }

  nlohmann::json snapshot() const override {
    std::vector<double> mu_hat, rho;
    std::vector<std::int64_t> counts;
    for (int i = 0; i < state_.m(); ++i) {
      mu_hat.push_back(state_.mean(i));
      const double r = state_.radius(i);
      rho.push_back(std::isinf(r) ? -1.0 : r);
      counts.push_back(state_.count(i));
    }
    return {{"policy", name()}, {"window", state_.window()}, {"mu_hat", mu_hat},
            {"rho", rho},       {"counts", counts}};
  }

  std::string name() const override { return "cucb_sw"; }
  const SlidingWindowState& state() const { return state_; }

 private:
  SlidingWindowState state_;
  OracleFn oracle_;
  Action last_action_;
};

enum class BoundMode { dep, indep };

inline BoundMode parse_mode(const std::string& s) {
  if (s == "dep") return BoundMode::dep;
  if (s == "indep") return BoundMode::indep;
  throw ConfigError("mode must be 'dep' or 'indep', got '" + s + "'");
}

inline Round round_positive(double x) { return std::max<Round>(1, std::llround(x)); }

// Window length from the known non-stationarity measure (variation V, or the
// switching count S in its place). A zero measure means stationary: w = T.
inline Round recommended_window(Round T, double measure, BoundMode mode, int m, int K) {
  if (T < 1) throw ConfigError("T must be >= 1");
  if (measure < 0.0) throw ConfigError("measure must be >= 0");
  if (measure == 0.0) return T;
  const double Td = static_cast<double>(T);
  const double w =
      mode == BoundMode::dep
          ? std::sqrt(Td / measure)
          : std::cbrt(static_cast<double>(m)) * std::pow(Td, 2.0 / 3.0) /
                std::cbrt(static_cast<double>(K)) / std::pow(measure, 2.0 / 3.0);
  return std::min(round_positive(w), T);
}

}  // namespace nscmab
