#include <algorithm>

#include <gtest/gtest.h>

#include "csrl/env.hpp"
#include "csrl/reward.hpp"

namespace csrl {
namespace {

TEST(Reward, Examples) {
  const RewardParams p;
  EXPECT_EQ(compute_reward(2, 5, false, false, p), -25.0);
  EXPECT_EQ(compute_reward(0, 0, true, false, p), 100.0);
  EXPECT_EQ(compute_reward(0, 0, false, true, p), -100.0);
}

TEST(Reward, MatchesHandEvaluationOnIntegers) {
  Rng rng(2024);
  for (int i = 0; i < 1000; ++i) {
    RewardParams p;
    p.c_r = static_cast<double>(uniform_index(rng, 50));
    p.c_i = static_cast<double>(uniform_index(rng, 50));
    p.c_v = 1.0 + static_cast<double>(uniform_index(rng, 500));
    p.i_w = 1.0 + static_cast<double>(uniform_index(rng, 500));
    const int d_r = static_cast<int>(uniform_index(rng, 200));
    const int b_r = static_cast<int>(uniform_index(rng, d_r + 1));
    const int flag = static_cast<int>(uniform_index(rng, 3));
    const bool h_t = flag == 1, h_g = flag == 2;
    long long expected = 0;
    for (int k = 0; k < b_r; ++k) expected -= static_cast<long long>(p.c_r);
    for (int k = 0; k < d_r; ++k) expected -= static_cast<long long>(p.c_i);
    if (h_t) expected += static_cast<long long>(p.i_w);
    if (h_g) expected -= static_cast<long long>(p.c_v);
    EXPECT_EQ(compute_reward(b_r, d_r, h_t, h_g, p), static_cast<double>(expected));
  }
}

TEST(Reward, SuperpositionInCounts) {
  Rng rng(5);
  const RewardParams p;
  for (int i = 0; i < 200; ++i) {
    const int b1 = static_cast<int>(uniform_index(rng, 20)), b2 = static_cast<int>(uniform_index(rng, 20));
    const int d1 = b1 + static_cast<int>(uniform_index(rng, 20));
    const int d2 = b2 + static_cast<int>(uniform_index(rng, 20));
    const double zero = compute_reward(0, 0, false, false, p);
    EXPECT_DOUBLE_EQ(compute_reward(b1 + b2, d1 + d2, false, false, p),
                     compute_reward(b1, d1, false, false, p) +
                         compute_reward(b2, d2, false, false, p) - zero);
  }
}

TEST(Reward, AttackEndBeatsEveryNonTerminalReward) {
  const RewardParams p;
  const double end = compute_reward(0, 0, true, false, p);
  double best_running = -1e300;
  for (int d = 0; d <= 100; ++d)
    for (int b = 0; b <= d; ++b) best_running = std::max(best_running, compute_reward(b, d, false, false, p));
  EXPECT_GT(end, best_running);
}

TEST(Penalty, Examples) {
  const RewardParams p;
  EXPECT_EQ(compute_penalty(PenaltyKind::Pre, 0.0, p), -10.0);
  EXPECT_DOUBLE_EQ(compute_penalty(PenaltyKind::Post, 0.5, p), -20.0 * 1.5);
  EXPECT_EQ(compute_penalty(PenaltyKind::Post, 0.0, p), -p.p_post_base);
}

TEST(Penalty, AlwaysNegative) {
  RewardParams p;
  p.p_pre_base = 0.5;
  p.p_post_base = 0.25;
  for (double sev : {0.0, 1e-9, 0.3, 2.0, 1e6}) {
    EXPECT_LT(compute_penalty(PenaltyKind::Pre, sev, p), 0.0);
    EXPECT_LT(compute_penalty(PenaltyKind::Post, sev, p), 0.0);
  }
}

TEST(RewardParamsTest, Validation) {
  RewardParams p;
  EXPECT_NO_THROW(p.validate());
  p.i_w = 0.0;
  EXPECT_THROW(p.validate(), ConfigError);
  p = RewardParams{};
  p.c_r = -1.0;
  EXPECT_THROW(p.validate(), ConfigError);
  p = RewardParams{};
  p.p_pre_base = 0.0;
  EXPECT_THROW(p.validate(), ConfigError);
}

}  // namespace
}  // namespace csrl
