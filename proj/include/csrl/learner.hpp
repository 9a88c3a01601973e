#pragma once

#include <array>
#include <vector>

#include "csrl/actions.hpp"
#include "csrl/constraints.hpp"
#include "csrl/state.hpp"

namespace csrl {

struct LearnerConfig {
  int m_events = 5;
  double violation_ratio = 1.0;

  void validate() const;
};

struct PairStats {
  int events = 0;
  int violations = 0;
  double reward_sum = 0.0;
};

enum class OutcomeKind { Reward, PrePenalty, PostPenalty };

struct Outcome {
  OutcomeKind kind = OutcomeKind::Reward;
  double reward = 0.0;  // only meaningful for Reward
};

class ExperienceStats {
 public:
  void record_outcome(int state, int action, const Outcome& outcome);
  const PairStats& at(int state, int action) const { return table_.at(state).at(action); }

 private:
  std::array<std::array<PairStats, kNumActions>, kNumStates> table_{};
};

// One learned rule per (state, action) with at least m_events observations and
// violations / events >= violation_ratio, skipping pairs the set already
// excludes and the do-nothing fallback. Ordered by (state, action).
std::vector<ExclusionRule> propose_rules(const ExperienceStats& stats, const LearnerConfig& cfg,
                                         const ConstraintSet& existing);

// Proposes and promotes in one step; returns the number of rules added.
int promote_rules(ConstraintSet& cs, const ExperienceStats& stats, const LearnerConfig& cfg);

}  // namespace csrl
