#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "nscmab/bob.hpp"
#include "nscmab/simulation.hpp"

using namespace nscmab;

namespace {

const TriggeringModel kFull{Triggering::full};
const RewardModel kLinear{RewardKind::linear};

}  // namespace

TEST(Exp3pParams, Formulas) {
  const auto p = exp3p_params(4, 100);
  EXPECT_NEAR(p.beta, std::sqrt(std::log(4.0) / 400.0), 1e-15);
  EXPECT_NEAR(p.eta, 0.95 * std::sqrt(std::log(4.0) / 400.0), 1e-15);
  EXPECT_NEAR(p.gamma, 1.05 * std::sqrt(4.0 * std::log(4.0) / 100.0), 1e-15);
  EXPECT_NEAR(p.beta, 0.0588705, 5e-7);
  EXPECT_NEAR(p.eta, 0.0559270, 5e-7);
  EXPECT_NEAR(p.gamma, 0.2472561, 5e-7);
}

TEST(Exp3pParams, LimitsAndCap) {
  const auto big = exp3p_params(2, std::int64_t{1} << 50);
  EXPECT_LT(big.eta, 1e-7);
  EXPECT_LT(big.gamma, 1e-7);
  EXPECT_LT(big.beta, 1e-7);
  EXPECT_EQ(exp3p_params(2, 1).gamma, 1.0);
  EXPECT_THROW(exp3p_params(1, 10), ConfigError);
}

TEST(Exp3p, StartsUniformAndRewardsMove) {
  Exp3p e(2, 100);
  EXPECT_EQ(e.probabilities()[0], 0.5);
  EXPECT_EQ(e.probabilities()[1], 0.5);
  e.update(0, 1.0);
  EXPECT_GT(e.probabilities()[0], e.probabilities()[1]);
  EXPECT_THROW(e.update(0, 1.5), ContractError);
  EXPECT_THROW(e.update(0, -0.1), ContractError);
}

TEST(Exp3p, ProbabilityFloorAndGainGrowth) {
  const int K = 5;
  Exp3p e(K, 1000);
  Rng rng(1);
  std::vector<double> prev(K, 0.0);
  for (int t = 0; t < 1000; ++t) {
    const int arm = e.select(rng);
    e.update(arm, uniform01(rng));
    double total = 0.0;
    for (int i = 0; i < K; ++i) {
      const double p = e.probabilities()[static_cast<std::size_t>(i)];
      ASSERT_GE(p, e.params().gamma / K - 1e-15);
      total += p;
      ASSERT_GE(e.estimated_gains()[static_cast<std::size_t>(i)], prev[static_cast<std::size_t>(i)]);
      prev[static_cast<std::size_t>(i)] = e.estimated_gains()[static_cast<std::size_t>(i)];
    }
    ASSERT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(Exp3p, RegretOnTwoArms) {
  const int K = 2;
  const std::int64_t T = 10000;
  double regret = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Exp3p e(K, T);
    Rng rng = make_stream(seed, 7);
    double reward = 0.0;
    for (std::int64_t t = 0; t < T; ++t) {
      const int arm = e.select(rng);
      const double g = arm == 0 ? 1.0 : 0.0;
      reward += g;
      e.update(arm, g);
    }
    regret += static_cast<double>(T) - reward;
  }
  EXPECT_LE(regret / 20, 5.0 * std::sqrt(K * T * std::log(double(K))));
}

TEST(Bob, WindowExponent) {
  EXPECT_EQ(window_exponent(1), 0);
  EXPECT_EQ(window_exponent(15), 3);
  EXPECT_EQ(window_exponent(16), 4);
  EXPECT_EQ(window_exponent(17), 4);
}

TEST(Bob, MasterArmsArePowersOfTwo) {
  const auto space = ActionSpace::top_k(2, 1);
  CucbBob bob(2, 160, 16, 0.0, 1.0, make_exact_oracle(space, kLinear), Rng(1));
  EXPECT_EQ(bob.master().arms(), 5);
  const EnvSchedule sched(2, 160, {{1, {0.7, 0.2}}});
  Rng rng(2);
  simulate(sched, bob, kFull, kLinear, space, rng, 0);
  for (Round w : bob.block_windows()) EXPECT_TRUE(w == 1 || w == 2 || w == 4 || w == 8 || w == 16) << w;
  EXPECT_EQ(bob.block_windows().size(), 10u);
}

TEST(Bob, SingleBlockIsOneCucbSw) {
  const auto space = ActionSpace::top_k(3, 1);
  const Round T = 64;
  CucbBob bob(3, T, T, 0.0, 1.0, make_exact_oracle(space, kLinear), Rng(3));
  const EnvSchedule sched(3, T, {{1, {0.7, 0.2, 0.5}}});
  Rng rng(4);
  simulate(sched, bob, kFull, kLinear, space, rng, 0);
  ASSERT_EQ(bob.block_windows().size(), 1u);
  EXPECT_EQ(bob.inner()->state().window(), bob.block_windows()[0]);
}

TEST(Bob, FeedsNormalizedAndBlocksIsolated) {
  const auto space = ActionSpace::top_k(2, 1);
  const Round T = 3000, L = 70;  // last block is short
  CucbBob bob(2, T, L, 0.0, 1.0, make_exact_oracle(space, kLinear), Rng(5));
  Rng gen(6), rng(7);
  const auto sched = make_piecewise(2, T, 6, uniform_means, 0.3, gen);
  for (Round t = 1; t <= T; ++t) {
    const Action a = bob.act(t);
    if ((t - 1) % L == 0) {
      for (int i = 0; i < 2; ++i) ASSERT_EQ(bob.inner()->state().count(i), 0);
    }
    bob.observe(t, sample_round(sched, t, a, kFull, kLinear, rng));
  }
  ASSERT_EQ(bob.feeds().size(), static_cast<std::size_t>((T + L - 1) / L));
  for (double f : bob.feeds()) {
    EXPECT_GE(f, 0.0);
    EXPECT_LE(f, 1.0);
  }
}

TEST(Bob, RewardRangeMismatchIsReported) {
  const auto space = ActionSpace::top_k(3, 2);
  CucbBob bob(3, 20, 10, 0.0, 1.0, make_exact_oracle(space, kLinear), Rng(8));
  const EnvSchedule sched(3, 20, {{1, {1.0, 1.0, 1.0}}});
  Rng rng(9);
  EXPECT_THROW(simulate(sched, bob, kFull, kLinear, space, rng, 0), ConfigError);
}

TEST(RecommendedBlock, Examples) {
  EXPECT_EQ(recommended_block(10000, 8, 2, 1.0, BoundMode::indep), 400);
  EXPECT_EQ(recommended_block(10000, 8, 2, 1.0, BoundMode::dep),
            std::llround(std::pow(2.0, 2.0 / 3.0) * std::cbrt(10000.0)));
  EXPECT_EQ(recommended_block(10000, 8, 2, 1.0, BoundMode::dep), 34);
  EXPECT_EQ(recommended_block(10000, 8, 2, 1e9, BoundMode::indep), 1);
  EXPECT_EQ(recommended_block(10, 8, 2, 1e-3, BoundMode::indep), 10);
}
