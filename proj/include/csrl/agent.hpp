#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "csrl/actions.hpp"
#include "csrl/attack.hpp"
#include "csrl/constraints.hpp"
#include "csrl/env.hpp"
#include "csrl/learner.hpp"
#include "csrl/ppo.hpp"
#include "csrl/reward.hpp"
#include "csrl/state.hpp"

namespace csrl {

struct AgentConfig {
  EnvConfig env;
  AttackerConfig attacker;
  Discretization bins;
  ActionSteps steps;
  RewardParams reward;
  Hyperparams ppo;
  LearnerConfig learner;
  SolveOptions solver;
  double count_slack = 0.05;
  bool pre_sat = true;      // false: actions execute ungated (ablation baseline)
  bool eval_greedy = true;  // evaluation picks the most probable action

  void validate() const;
};

// Topology plus the initial constraint set formulated over it.
struct World {
  std::shared_ptr<const Topology> topology;
  ConstraintSet constraints;
};

World build_world(const AgentConfig& config);

// Ground-truth simulator for one episode: environment state, attacker and the
// environment's own random stream.
class Simulation {
 public:
  Simulation(std::shared_ptr<const Topology> topology, const EnvConfig& env,
             const AttackerConfig& attacker, std::uint64_t seed);

  // Draws the initial compromised set, installs the detector assignment and
  // emits the first observation.
  void reset(std::vector<std::uint8_t> assignment);

  const Topology& topology() const { return *topology_; }
  const EnvConfig& env_config() const { return env_; }
  const AttackerConfig& attacker() const { return attacker_; }
  const EnvState& state() const { return state_; }
  EnvState& mutable_state() { return state_; }
  const Observation& observation() const { return obs_; }

  ReimageOutcome reimage(std::span<const int> targets);
  // Exploration and propagation; returns the newly compromised devices.
  std::vector<int> attacker_move();
  Terminal update_terminal();
  const Observation& observe(const ReimageOutcome& reimaged);

 private:
  std::shared_ptr<const Topology> topology_;
  EnvConfig env_;
  AttackerConfig attacker_;
  Rng rng_;
  EnvState state_;
  Observation obs_;
};

// Targets, threshold and ratio after an action, computed from the last
// observation. Ratio actions flag that a new detector assignment is needed.
struct ActionEffect {
  std::vector<int> targets;
  double delta_d = 0.0;
  double f = 0.0;
  bool resolve_detectors = false;
};

ActionEffect apply_action(int action, const EnvState& state, const Observation& obs,
                          const ActionSteps& steps);

// Ungated detector choice for the ablation baseline: cheapest detectors first
// up to round(f * D), stopping before the expected energy would exceed
// e_budget. Coverage is not considered.
std::vector<std::uint8_t> greedy_unchecked_assignment(const Topology& topology, double target_f,
                                                      double e_budget);

enum class EpisodeOutcome { AttackEnd, AttackGoal, Truncated };

const char* to_string(EpisodeOutcome outcome);

struct StepLog {
  int t = 0;
  int state = 0;
  std::vector<int> rejected;  // pre-sat rejections within this time-sequence
  int action = 0;
  bool pre_unknown = false;   // some rejection came from a solver budget overrun
  bool post_ok = true;
  double reward = 0.0;        // executed-action reward or post penalty
  double penalties = 0.0;     // sum of pre penalties in this time-sequence
  int compromised = 0;        // ground truth, diagnostics only
  double estimated_ratio = 0.0;
  double delta_d = 0.0;
  double f = 0.0;
  int b_r = 0;
  int d_r = 0;
  double energy = 0.0;
};

// Tab-separated: episode t state action rejected pre post reward penalties
// compromised est_ratio delta_d f b_r d_r energy
void write_step_log_header(std::ostream& out);
void write_step_log(std::ostream& out, int episode, const StepLog& step);

struct EpisodeResult {
  int steps_taken = 0;
  EpisodeOutcome outcome = EpisodeOutcome::Truncated;
  double total_reward = 0.0;
  int pre_rejections = 0;
  int post_violations = 0;
  std::vector<StepLog> log;
};

struct StepResult {
  std::vector<Record> records;  // PreRejected..., then the Executed record
  StepLog log;
};

// Gated decision loop for one policy. In learning mode pre-sat penalties update
// the actor immediately, records go to the rollout buffer and outcomes feed
// the constraint learner; otherwise the policy is frozen.
class DefenseAgent {
 public:
  DefenseAgent(const AgentConfig& config, std::shared_ptr<const Topology> topology,
               ConstraintSet constraints, ActorCritic policy);

  void set_learning(bool learning) { learning_ = learning; }
  bool learning() const { return learning_; }

  StepResult run_time_sequence(Simulation& sim, Rng& rng);
  EpisodeResult run_episode(std::uint64_t seed, bool keep_log = false);

  // Initial assignment for f_init; throws ConfigError when none exists.
  std::vector<std::uint8_t> initial_assignment();

  const ActorCritic& policy() const { return policy_; }
  ActorCritic& policy() { return policy_; }
  const ConstraintSet& constraints() const { return constraints_; }
  ConstraintSet& constraints() { return constraints_; }
  const ExperienceStats& stats() const { return stats_; }
  ExperienceStats& stats() { return stats_; }
  std::vector<Record>& buffer() { return buffer_; }
  const SolveCache& solve_cache() const { return cache_; }

 private:
  PreCheck gate(int action, int state, const EnvState& env);

  AgentConfig config_;
  std::shared_ptr<const Topology> topology_;
  ConstraintSet constraints_;
  ActorCritic policy_;
  ExperienceStats stats_;
  std::vector<Record> buffer_;
  SolveCache cache_;
  double e_budget_;
  bool learning_ = true;
};

class TrainingAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainResult {
  ActorCritic policy;
  ConstraintSet constraints;
  std::vector<double> episode_rewards;
  std::vector<EpisodeOutcome> outcomes;
  std::vector<int> steps;
  int updates = 0;
  int rules_learned = 0;
};

TrainResult train(const AgentConfig& config, const World& world, int episodes, std::uint64_t seed);

ActorCritic initial_policy(const AgentConfig& config, std::uint64_t seed);

struct EvalMetrics {
  int episodes = 0;
  double success_rate = 0.0;
  double goal_rate = 0.0;
  double truncation_rate = 0.0;
  double mean_reward = 0.0;
  std::vector<int> time_to_end;  // steps of each AttackEnd episode, ascending

  // Fraction of all episodes that reached AttackEnd within t steps, t = 0..cap.
  std::vector<double> cdf(int cap) const;
  // Nearest-rank percentile of time-to-end over all episodes, where episodes
  // that never reached AttackEnd count as unbounded; -1 if the rank lands on
  // one of those.
  int time_to_end_percentile(double q) const;
};

// Frozen-policy rollouts, seeded per episode from (seed, index); `jobs`
// worker threads, merged in episode order.
EvalMetrics evaluate(const ActorCritic& policy, const ConstraintSet& constraints,
                     const AgentConfig& config, const World& world, int n_episodes,
                     std::uint64_t seed, int jobs = 1,
                     std::vector<EpisodeResult>* episodes = nullptr);

}  // namespace csrl
