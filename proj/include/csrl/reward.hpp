#pragma once

namespace csrl {

struct RewardParams {
  double c_r = 10.0;          // cost per benign reimage
  double c_i = 1.0;           // cost per reimage
  double c_v = 100.0;         // attack-goal cost
  double i_w = 100.0;         // attack-end incentive
  double p_pre_base = 10.0;
  double p_post_base = 20.0;

  void validate() const;
};

enum class PenaltyKind { Pre, Post };

// R = -b_r*C_r - d_r*C_i + H_t*I_w - H_g*C_v
double compute_reward(int b_r, int d_r, bool attack_ended, bool attack_goal,
                      const RewardParams& p);

// Pre: -p_pre_base. Post: -p_post_base * (1 + severity).
double compute_penalty(PenaltyKind kind, double severity, const RewardParams& p);

}  // namespace csrl
