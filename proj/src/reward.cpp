#include "csrl/reward.hpp"

#include <cassert>

#include "csrl/env.hpp"

namespace csrl {

void RewardParams::validate() const {
  if (c_r < 0 || c_i < 0 || c_v <= 0 || i_w <= 0 || p_pre_base <= 0 || p_post_base <= 0)
    throw ConfigError("reward costs must be nonnegative; c_v, i_w and penalty bases positive");
}

double compute_reward(int b_r, int d_r, bool attack_ended, bool attack_goal,
                      const RewardParams& p) {
  assert(0 <= b_r && b_r <= d_r);
  assert(!(attack_ended && attack_goal));
  return -b_r * p.c_r - d_r * p.c_i + (attack_ended ? p.i_w : 0.0) -
         (attack_goal ? p.c_v : 0.0);
}

double compute_penalty(PenaltyKind kind, double severity, const RewardParams& p) {
  assert(severity >= 0.0);
  if (kind == PenaltyKind::Pre) return -p.p_pre_base;
  return -p.p_post_base * (1.0 + severity);
}

}  // namespace csrl
