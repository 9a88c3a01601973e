#pragma once

#include <bitset>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "csrl/mlp.hpp"
#include "csrl/random.hpp"

namespace csrl {

struct Hyperparams {
  double gamma = 0.98;
  double clip_eps = 0.2;
  double learning_rate = 0.005;
  double entropy_coef = 0.05;
  double value_coef = 0.5;
  int epochs = 4;
  int minibatch_size = 64;
  int horizon = 2048;  // T, rollout records collected before an update
  int retry_cap = 13;
  bool normalize_advantages = true;
  std::vector<int> hidden{64, 64};

  void validate() const;
};

struct PolicyOutput {
  std::vector<double> probs;
  double value = 0.0;
};

// Separate actor (state -> action logits) and critic (state -> value) MLPs.
class ActorCritic {
 public:
  ActorCritic() = default;
  ActorCritic(int n_inputs, int n_actions, const std::vector<int>& hidden);

  void init(Rng& rng);

  int n_inputs() const { return actor.input_dim(); }
  int n_actions() const { return actor.output_dim(); }

  PolicyOutput forward(std::span<const double> features) const;
  // One-hot input of width n_inputs().
  PolicyOutput forward_state(int state) const;

  Mlp actor;
  Mlp critic;
};

Eigen::MatrixXd one_hot_batch(std::span<const int> states, int width);

// Column-wise softmax of a logits matrix.
Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& logits);

inline constexpr std::size_t kMaxActions = 64;
using ActionMask = std::bitset<kMaxActions>;  // set bit = excluded

struct SampledAction {
  int action = 0;
  double log_prob = 0.0;  // under the full, unmasked distribution
};

// Samples from probs renormalized over the unmasked actions.
SampledAction sample_action(std::span<const double> probs, const ActionMask& mask, Rng& rng);
// Highest-probability unmasked action (lowest index on ties).
SampledAction greedy_action(std::span<const double> probs, const ActionMask& mask);

enum class RecordKind { Executed, PreRejected };

struct Record {
  int state = 0;
  int action = 0;
  double log_prob_old = 0.0;
  double reward = 0.0;
  double value_old = 0.0;
  bool done = false;         // terminal successor, bootstrap value 0
  bool episode_end = false;  // last record of a segment (terminal or truncated)
  int next_state = 0;
  RecordKind kind = RecordKind::Executed;
};

struct AdvantageResult {
  std::vector<double> advantages;
  std::vector<double> targets;  // A_t + V(s_t)
};

// A_t = delta_t + gamma * A_{t+1}, delta_t = r_t + gamma * V(s_{t+1}) - V(s_t),
// with V(s_{t+1}) = 0 on done and the recursion cut at episode_end.
AdvantageResult compute_advantages(std::span<const Record> records, double gamma,
                                   const std::function<double(int)>& value_fn);

struct Batch {
  Eigen::MatrixXd features;  // n_inputs x B
  std::vector<int> actions;
  std::vector<double> log_prob_old;
  std::vector<double> advantages;
  std::vector<double> targets;
};

struct LossResult {
  double loss = 0.0;
  double surrogate = 0.0;  // mean clipped objective
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  std::vector<double> actor_grad;
  std::vector<double> critic_grad;
};

// loss = -mean(min(r A, clip(r, 1-eps, 1+eps) A)) + value_coef * MSE(V, targets)
//        - entropy_coef * mean(entropy)
LossResult clipped_loss(const Batch& batch, const ActorCritic& net, const Hyperparams& hyper);

// Per-sample clipped surrogate objective.
double clipped_objective(double ratio, double advantage, double clip_eps);

class Adam {
 public:
  Adam() = default;
  explicit Adam(std::size_t n) : m_(n, 0.0), v_(n, 0.0) {}
  void step(std::span<double> params, std::span<const double> grad, double lr);

 private:
  std::vector<double> m_;
  std::vector<double> v_;
  long t_ = 0;
};

struct Optimizer {
  Adam actor;
  Adam critic;
  static Optimizer for_net(const ActorCritic& net) {
    return {Adam(net.actor.num_params()), Adam(net.critic.num_params())};
  }
};

struct UpdateStats {
  int minibatches = 0;
  int skipped = 0;  // aborted on a non-finite loss
  double mean_loss = 0.0;
};

// Freezes pi_old (log-probs and values recomputed from the current network),
// then runs `epochs` passes of shuffled minibatch Adam steps. Clears records.
UpdateStats ppo_update(ActorCritic& net, Optimizer& opt, std::vector<Record>& records,
                       const Hyperparams& hyper, Rng& rng);

// One SGD step on -penalty * log pi(action | state), actor only.
void penalty_update(ActorCritic& net, int state, int action, double penalty,
                    const Hyperparams& hyper);

}  // namespace csrl
