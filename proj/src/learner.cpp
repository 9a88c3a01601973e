#include "csrl/learner.hpp"

namespace csrl {

void LearnerConfig::validate() const {
  if (m_events < 1) throw ConfigError("learner.m_events must be >= 1");
  if (!(violation_ratio > 0.0 && violation_ratio <= 1.0))
    throw ConfigError("learner.violation_ratio must lie in (0, 1]");
}

void ExperienceStats::record_outcome(int state, int action, const Outcome& outcome) {
  PairStats& s = table_.at(state).at(action);
  ++s.events;
  if (outcome.kind == OutcomeKind::Reward) s.reward_sum += outcome.reward;
  else ++s.violations;
}

std::vector<ExclusionRule> propose_rules(const ExperienceStats& stats, const LearnerConfig& cfg,
                                         const ConstraintSet& existing) {
  std::vector<ExclusionRule> rules;
  for (int s = 0; s < kNumStates; ++s) {
    for (int a = 0; a < kNumActions; ++a) {
      if (a == kDoNothingAction || existing.excludes(s, a)) continue;
      const PairStats& p = stats.at(s, a);
      if (p.events < cfg.m_events) continue;
      // tolerance so e.g. 7 of 10 meets ratio 0.7
      if (static_cast<double>(p.violations) < cfg.violation_ratio * p.events - 1e-12) continue;
      rules.push_back({s, a, RuleOrigin::Learned});
    }
  }
  return rules;
}

int promote_rules(ConstraintSet& cs, const ExperienceStats& stats, const LearnerConfig& cfg) {
  const std::vector<ExclusionRule> rules = propose_rules(stats, cfg, cs);
  if (rules.empty()) return 0;
  std::vector<ConstraintItem> add(rules.begin(), rules.end());
  cs = update_set(cs, add, {});
  return static_cast<int>(rules.size());
}

}  // namespace csrl
