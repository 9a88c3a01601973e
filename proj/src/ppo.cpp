#include "csrl/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "csrl/env.hpp"

namespace csrl {

void Hyperparams::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
  };
  require(gamma >= 0.0 && gamma < 1.0, "ppo.gamma must lie in [0, 1)");
  require(clip_eps > 0.0 && clip_eps < 1.0, "ppo.clip_eps must lie in (0, 1)");
  require(learning_rate >= 0.0, "ppo.learning_rate must be nonnegative");
  require(entropy_coef >= 0.0 && value_coef >= 0.0, "ppo loss coefficients must be nonnegative");
  require(epochs >= 1 && minibatch_size >= 1 && horizon >= 1, "ppo epochs/minibatch/horizon >= 1");
  require(retry_cap >= 1, "ppo.retry_cap must be >= 1");
  require(!hidden.empty(), "ppo.hidden needs at least one layer");
  for (int h : hidden) require(h >= 1, "ppo.hidden layer sizes must be positive");
}

ActorCritic::ActorCritic(int n_inputs, int n_actions, const std::vector<int>& hidden) {
  std::vector<int> a{n_inputs};
  a.insert(a.end(), hidden.begin(), hidden.end());
  std::vector<int> c = a;
  a.push_back(n_actions);
  c.push_back(1);
  actor = Mlp(a);
  critic = Mlp(c);
}

void ActorCritic::init(Rng& rng) {
  actor.init(rng, 0.01);
  critic.init(rng, 1.0);
}

Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd p(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.cols(); ++i) {
    const double mx = logits.col(i).maxCoeff();
    p.col(i) = (logits.col(i).array() - mx).exp().matrix();
    p.col(i) /= p.col(i).sum();
  }
  return p;
}

namespace {

// log-softmax of one column
Eigen::VectorXd log_softmax(const Eigen::VectorXd& z) {
  const double mx = z.maxCoeff();
  const double lse = mx + std::log((z.array() - mx).exp().sum());
  return (z.array() - lse).matrix();
}

}  // namespace

PolicyOutput ActorCritic::forward(std::span<const double> features) const {
  Eigen::MatrixXd x = Eigen::Map<const Eigen::VectorXd>(features.data(),
                                                        static_cast<Eigen::Index>(features.size()));
  const Eigen::MatrixXd p = softmax_columns(actor.forward(x));
  PolicyOutput out;
  out.probs.assign(p.data(), p.data() + p.size());
  out.value = critic.forward(x)(0, 0);
  return out;
}

PolicyOutput ActorCritic::forward_state(int state) const {
  std::vector<double> x(static_cast<std::size_t>(n_inputs()), 0.0);
  x.at(state) = 1.0;
  return forward(x);
}

Eigen::MatrixXd one_hot_batch(std::span<const int> states, int width) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(width, static_cast<Eigen::Index>(states.size()));
  for (std::size_t i = 0; i < states.size(); ++i) x(states[i], static_cast<Eigen::Index>(i)) = 1.0;
  return x;
}

SampledAction sample_action(std::span<const double> probs, const ActionMask& mask, Rng& rng) {
  const int n = static_cast<int>(probs.size());
  double mass = 0.0;
  int last = -1;
  for (int a = 0; a < n; ++a) {
    if (mask[a]) continue;
    mass += probs[a];
    last = a;
  }
  if (last < 0) throw std::logic_error("every action is masked");
  int chosen = last;
  if (mass > 0.0) {
    const double u = uniform01(rng) * mass;
    double acc = 0.0;
    for (int a = 0; a < n; ++a) {
      if (mask[a]) continue;
      acc += probs[a];
      if (u < acc) {
        chosen = a;
        break;
      }
    }
  }
  return {chosen, std::log(std::max(probs[chosen], 1e-300))};
}

SampledAction greedy_action(std::span<const double> probs, const ActionMask& mask) {
  int best = -1;
  for (int a = 0; a < static_cast<int>(probs.size()); ++a)
    if (!mask[a] && (best < 0 || probs[a] > probs[best])) best = a;
  if (best < 0) throw std::logic_error("every action is masked");
  return {best, std::log(std::max(probs[best], 1e-300))};
}

AdvantageResult compute_advantages(std::span<const Record> records, double gamma,
                                   const std::function<double(int)>& value_fn) {
  const std::size_t n = records.size();
  AdvantageResult out;
  out.advantages.assign(n, 0.0);
  out.targets.assign(n, 0.0);
  double next_adv = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const Record& r = records[i];
    const double v = value_fn(r.state);
    const double v_next = r.done ? 0.0 : value_fn(r.next_state);
    const double delta = r.reward + gamma * v_next - v;
    const bool cut = r.episode_end || i + 1 == n;
    next_adv = delta + (cut ? 0.0 : gamma * next_adv);
    out.advantages[i] = next_adv;
    out.targets[i] = next_adv + v;
  }
  return out;
}

double clipped_objective(double ratio, double advantage, double clip_eps) {
  const double clipped = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps);
  return std::min(ratio * advantage, clipped * advantage);
}

LossResult clipped_loss(const Batch& batch, const ActorCritic& net, const Hyperparams& hyper) {
  const Eigen::Index b = batch.features.cols();
  if (b == 0) throw std::invalid_argument("empty batch");
  const double inv_b = 1.0 / static_cast<double>(b);

  Mlp::Cache actor_cache;
  Mlp::Cache critic_cache;
  const Eigen::MatrixXd logits = net.actor.forward(batch.features, &actor_cache);
  const Eigen::MatrixXd values = net.critic.forward(batch.features, &critic_cache);

  Eigen::MatrixXd grad_logits(logits.rows(), b);
  Eigen::MatrixXd grad_values(1, b);
  LossResult out;
  double objective_sum = 0.0;
  double value_sum = 0.0;
  double entropy_sum = 0.0;
  int clipped = 0;
  for (Eigen::Index i = 0; i < b; ++i) {
    const Eigen::VectorXd logp = log_softmax(logits.col(i));
    const Eigen::VectorXd p = logp.array().exp().matrix();
    const int a = batch.actions[i];
    const double adv = batch.advantages[i];
    const double ratio = std::exp(logp(a) - batch.log_prob_old[i]);
    const double unclipped = ratio * adv;
    const double objective = clipped_objective(ratio, adv, hyper.clip_eps);
    // d objective / d log pi(a|s): zero when the clipped branch is the minimum
    const double g = unclipped <= objective ? ratio * adv : 0.0;
    if (std::abs(ratio - 1.0) > hyper.clip_eps) ++clipped;
    const double entropy = -(p.array() * logp.array()).sum();

    for (Eigen::Index j = 0; j < logits.rows(); ++j) {
      const double dlogp_a = (j == a ? 1.0 : 0.0) - p(j);
      const double dentropy = -p(j) * (logp(j) + entropy);
      grad_logits(j, i) = -inv_b * g * dlogp_a - hyper.entropy_coef * inv_b * dentropy;
    }
    const double err = values(0, i) - batch.targets[i];
    grad_values(0, i) = hyper.value_coef * 2.0 * inv_b * err;

    objective_sum += objective;
    value_sum += err * err;
    entropy_sum += entropy;
  }
  out.surrogate = objective_sum * inv_b;
  out.value_loss = value_sum * inv_b;
  out.entropy = entropy_sum * inv_b;
  out.clip_fraction = clipped * inv_b;
  out.loss = -out.surrogate + hyper.value_coef * out.value_loss - hyper.entropy_coef * out.entropy;

  out.actor_grad.assign(net.actor.num_params(), 0.0);
  out.critic_grad.assign(net.critic.num_params(), 0.0);
  net.actor.backward(actor_cache, grad_logits, out.actor_grad);
  net.critic.backward(critic_cache, grad_values, out.critic_grad);
  return out;
}

void Adam::step(std::span<double> params, std::span<const double> grad, double lr) {
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  if (m_.size() != params.size()) throw std::invalid_argument("adam state size mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = kBeta1 * m_[i] + (1.0 - kBeta1) * grad[i];
    v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * grad[i] * grad[i];
    params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + kEps);
  }
}

namespace {

bool all_finite(std::span<const double> xs) {
  return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

UpdateStats ppo_update(ActorCritic& net, Optimizer& opt, std::vector<Record>& records,
                       const Hyperparams& hyper, Rng& rng) {
  const std::size_t n = records.size();
  if (n < static_cast<std::size_t>(hyper.minibatch_size))
    throw std::invalid_argument("rollout buffer smaller than one minibatch");
  const int width = net.n_inputs();

  // freeze pi_old
  std::vector<int> states(n);
  for (std::size_t i = 0; i < n; ++i) states[i] = records[i].state;
  const Eigen::MatrixXd x_all = one_hot_batch(states, width);
  const Eigen::MatrixXd logits = net.actor.forward(x_all);
  std::vector<int> every_state(width);
  std::iota(every_state.begin(), every_state.end(), 0);
  const Eigen::MatrixXd state_values = net.critic.forward(one_hot_batch(every_state, width));
  for (std::size_t i = 0; i < n; ++i) {
    records[i].log_prob_old = log_softmax(logits.col(static_cast<Eigen::Index>(i)))(records[i].action);
    records[i].value_old = state_values(0, records[i].state);
  }
  AdvantageResult adv = compute_advantages(
      records, hyper.gamma, [&](int s) { return state_values(0, s); });
  if (hyper.normalize_advantages && n > 1) {
    const double mean = std::accumulate(adv.advantages.begin(), adv.advantages.end(), 0.0) / n;
    double var = 0.0;
    for (double a : adv.advantages) var += (a - mean) * (a - mean);
    const double sd = std::sqrt(var / n);
    for (double& a : adv.advantages) a = (a - mean) / (sd + 1e-8);
  }

  UpdateStats stats;
  std::vector<std::size_t> index(n);
  std::iota(index.begin(), index.end(), 0);
  const std::size_t mb = static_cast<std::size_t>(hyper.minibatch_size);
  double loss_sum = 0.0;
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    for (std::size_t i = n - 1; i > 0; --i) std::swap(index[i], index[uniform_index(rng, i + 1)]);
    for (std::size_t start = 0; start < n; start += mb) {
      const std::size_t end = std::min(n, start + mb);
      Batch batch;
      std::vector<int> bs;
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t r = index[k];
        bs.push_back(records[r].state);
        batch.actions.push_back(records[r].action);
        batch.log_prob_old.push_back(records[r].log_prob_old);
        batch.advantages.push_back(adv.advantages[r]);
        batch.targets.push_back(adv.targets[r]);
      }
      batch.features = one_hot_batch(bs, width);
      const LossResult loss = clipped_loss(batch, net, hyper);
      ++stats.minibatches;
      if (!std::isfinite(loss.loss) || !all_finite(loss.actor_grad) ||
          !all_finite(loss.critic_grad)) {
        ++stats.skipped;
        continue;
      }
      loss_sum += loss.loss;
      opt.actor.step(net.actor.params(), loss.actor_grad, hyper.learning_rate);
      opt.critic.step(net.critic.params(), loss.critic_grad, hyper.learning_rate);
    }
  }
  const int applied = stats.minibatches - stats.skipped;
  stats.mean_loss = applied > 0 ? loss_sum / applied : 0.0;
  records.clear();
  return stats;
}

void penalty_update(ActorCritic& net, int state, int action, double penalty,
                    const Hyperparams& hyper) {
  const std::vector<int> s{state};
  Mlp::Cache cache;
  const Eigen::MatrixXd logits = net.actor.forward(one_hot_batch(s, net.n_inputs()), &cache);
  const Eigen::MatrixXd p = softmax_columns(logits);
  Eigen::MatrixXd grad_logits(p.rows(), 1);
  for (Eigen::Index j = 0; j < p.rows(); ++j)
    grad_logits(j, 0) = -penalty * ((j == action ? 1.0 : 0.0) - p(j, 0));
  std::vector<double> grad(net.actor.num_params(), 0.0);
  net.actor.backward(cache, grad_logits, grad);
  std::span<double> params = net.actor.params();
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= hyper.learning_rate * grad[i];
}

}  // namespace csrl
