#pragma once

#include "core.hpp"
#include "env.hpp"
#include "metrics.hpp"
#include "oracles.hpp"
#include "policy.hpp"
#include "rng.hpp"

namespace nscmab {

// The interaction loop: act, sample the environment, account regret against
// the true means, feed back the triggered observations.
inline RegretLedger simulate(const EnvSchedule& schedule, Policy& policy, const TriggeringModel& trig,
                             const RewardModel& reward, const ActionSpace& space, Rng& env_rng,
                             std::uint64_t seed, const OracleSpec& oracle = {}) {
  RegretLedger ledger(seed, oracle.alpha, oracle.beta);
  for (Round t = 1; t <= schedule.horizon(); ++t) {
    const Action action = policy.act(t);
    const auto outcome = sample_round(schedule, t, action, trig, reward, env_rng);
    ledger.record(t, schedule.means(t), action, reward, space);
    ledger.record_realized(outcome.realized_reward);
    policy.observe(t, outcome);
  }
  return ledger;
}

}  // namespace nscmab
