#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "core.hpp"
#include "env.hpp"

namespace nscmab {

// Uniform interface for the simulation loop. Construction is init; each round
// the loop calls act(t) and then observe(t, feedback) with the triggered set
// and observed outcomes of that round.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual Action act(Round t) = 0;
  virtual void observe(Round t, const RoundOutcome& feedback) = 0;
  virtual nlohmann::json snapshot() const = 0;
  virtual std::string name() const = 0;
};

// Observations must come from triggered arms, and triggered arms from the
// played action.
inline void check_feedback(const Action& played, const RoundOutcome& feedback) {
  for (Arm a : feedback.triggered)
    if (!contains(played, a))
      throw ContractError("triggered arm " + std::to_string(a) + " not in played action");
  for (const auto& o : feedback.observations)
    if (!contains(feedback.triggered, o.arm))
      throw ContractError("observation for untriggered arm " + std::to_string(o.arm));
}

}  // namespace nscmab
