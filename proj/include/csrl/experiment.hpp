#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "csrl/agent.hpp"
#include "csrl/config.hpp"

namespace csrl {

// raw / max(raw) when the maximum is positive; otherwise min-max scaled so the
// best episode still maps to 1.
std::vector<double> normalize_curve(std::span<const double> raw);

// Trailing mean over the last `window` entries (fewer at the start).
std::vector<double> smooth_curve(std::span<const double> values, int window);

void write_learning_curve(std::ostream& out, std::span<const double> raw);
void write_cdf(std::ostream& out, const EvalMetrics& metrics, int cap);
void write_summary(std::ostream& out, const EvalMetrics& metrics);

ConstraintSet with_rules(const ConstraintSet& cs, const std::vector<ExclusionRule>& rules);

struct RunOutcome {
  TrainResult train;
  EvalMetrics eval;
};

// Trains on `seed`, then evaluates the final policy and learned rules on
// episodes derived from the same seed.
RunOutcome train_and_evaluate(const AgentConfig& config, const World& world, int episodes,
                              int eval_episodes, std::uint64_t seed, int jobs);

struct AblationRow {
  AttackerKind attacker = AttackerKind::Naive;
  int devices = 0;
  bool pre_sat = true;
  int seeds = 0;
  double mean_reward = 0.0;  // averaged over seeds
  double success_rate = 0.0;
  double goal_rate = 0.0;
};

struct AblationSetting {
  AttackerKind attacker;
  int devices;
};

// Pre-sat on and off over identical seeds run.seed, run.seed + 1, ...
std::vector<AblationRow> run_ablation(const ExperimentConfig& config,
                                      const std::vector<AblationSetting>& settings, int n_seeds,
                                      int jobs, std::ostream* progress = nullptr);

// attacker,devices,pre_sat,seeds,mean_reward,normalized_reward,success_rate,goal_rate
void write_compare(std::ostream& out, const std::vector<AblationRow>& rows, double i_w);

// Subcommands. Each writes its artifacts under config.run.out (created if needed).
void cmd_train(const ExperimentConfig& config, int jobs, std::ostream& log);
void cmd_eval(const ExperimentConfig& config, const std::string& checkpoint, int jobs,
              const std::string& step_log, std::ostream& log);
void cmd_ablate(const ExperimentConfig& config, bool sweep, int n_seeds, int jobs,
                std::ostream& log);
void cmd_gen_topo(const TopologyParams& params, std::uint64_t seed, const std::string& path,
                  std::ostream& log);
void cmd_policy_inspect(const std::string& checkpoint, std::ostream& out);

}  // namespace csrl
