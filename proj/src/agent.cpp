#include "csrl/agent.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <numeric>
#include <ostream>
#include <thread>

#include "csrl/reward.hpp"

namespace csrl {

void AgentConfig::validate() const {
  env.validate();
  bins.validate();
  reward.validate();
  ppo.validate();
  learner.validate();
  if (attacker.n_explore < 1) throw ConfigError("attacker.n_explore must be >= 1");
  for (double s : steps.threshold)
    if (!(s > 0.0 && s <= 1.0)) throw ConfigError("actions.threshold_steps must lie in (0, 1]");
  for (double s : steps.ratio)
    if (!(s > 0.0 && s <= 1.0)) throw ConfigError("actions.ratio_steps must lie in (0, 1]");
  if (solver.node_budget < 1) throw ConfigError("constraints.node_budget must be >= 1");
  if (!(count_slack >= 0.0 && count_slack <= 1.0))
    throw ConfigError("constraints.count_slack must lie in [0, 1]");
}

World build_world(const AgentConfig& config) {
  std::shared_ptr<const Topology> topology;
  if (!config.env.topology_file.empty()) {
    std::ifstream in(config.env.topology_file);
    if (!in) throw ConfigError("cannot open topology file " + config.env.topology_file);
    topology = std::make_shared<const Topology>(read_topology(in));
  } else {
    topology = std::make_shared<const Topology>(
        generate_topology(config.env.topology, config.env.topology_seed));
  }
  if (2 * config.env.initial_compromised >= topology->n_devices())
    throw ConfigError("env.initial_compromised must be below half of the topology's devices");
  FormulationParams params = formulation_params(*topology, config.env);
  params.count_slack = config.count_slack;
  return {topology, formulate_initial(*topology, params)};
}

Simulation::Simulation(std::shared_ptr<const Topology> topology, const EnvConfig& env,
                       const AttackerConfig& attacker, std::uint64_t seed)
    : topology_(std::move(topology)), env_(env), attacker_(attacker), rng_(seed) {}

void Simulation::reset(std::vector<std::uint8_t> assignment) {
  const int n = topology_->n_devices();
  state_ = EnvState{};
  state_.compromised.assign(n, 0);
  state_.enabled = std::move(assignment);
  state_.delta_d = env_.delta_init;
  state_.f = env_.f_init;

  std::vector<int> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  const int k = std::min(env_.initial_compromised, n);
  for (int i = 0; i < k; ++i) {
    const int j = i + static_cast<int>(uniform_index(rng_, n - i));
    std::swap(ids[i], ids[j]);
    state_.compromised[ids[i]] = 1;
  }
  update_terminal();
  observe({});
}

ReimageOutcome Simulation::reimage(std::span<const int> targets) {
  return apply_reimage(state_, targets);
}

std::vector<int> Simulation::attacker_move() {
  const std::vector<int> explored = select_exploration_set(attacker_, *topology_, state_, rng_);
  std::vector<int> fresh =
      attempt_propagation(*topology_, state_, explored, env_.p_compromise, rng_);
  for (int v : fresh) state_.compromised[v] = 1;
  return fresh;
}

Terminal Simulation::update_terminal() {
  state_.terminal = terminal_check(state_);
  return state_.terminal;
}

const Observation& Simulation::observe(const ReimageOutcome& reimaged) {
  obs_ = emit_observation(*topology_, state_, compromised_shape(attacker_.kind, env_),
                          env_.k_benign, env_.energy_noise, rng_);
  obs_.b_r = reimaged.benign;
  obs_.d_r = reimaged.total;
  obs_.attack_ended = state_.terminal == Terminal::AttackEnd;
  obs_.attack_goal = state_.terminal == Terminal::AttackGoal;
  return obs_;
}

ActionEffect apply_action(int action, const EnvState& state, const Observation& obs,
                          const ActionSteps& steps) {
  ActionEffect e;
  e.delta_d = threshold_after(action, state.delta_d, steps);
  e.f = ratio_after(action, state.f, steps);
  e.resolve_detectors = action_class(action) == ActionClass::Ratio;
  if (reimages(action)) {
    for (int v = 0; v < static_cast<int>(obs.device_risk.size()); ++v) {
      const auto& risk = obs.device_risk[v];
      if (risk && *risk >= e.delta_d) e.targets.push_back(v);
    }
  }
  return e;
}

std::vector<std::uint8_t> greedy_unchecked_assignment(const Topology& topology, double target_f,
                                                      double e_budget) {
  const int d = topology.n_detectors();
  std::vector<int> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return topology.connection(a).energy_cost < topology.connection(b).energy_cost;
  });
  const int want = static_cast<int>(std::lround(target_f * d));
  std::vector<std::uint8_t> x(d, 0);
  double energy = 0.0;
  int count = 0;
  for (int id : order) {
    if (count >= want) break;
    const double c = topology.connection(id).energy_cost;
    if (energy + c > e_budget) break;
    x[id] = 1;
    energy += c;
    ++count;
  }
  return x;
}

const char* to_string(EpisodeOutcome outcome) {
  switch (outcome) {
    case EpisodeOutcome::AttackEnd: return "attack_end";
    case EpisodeOutcome::AttackGoal: return "attack_goal";
    case EpisodeOutcome::Truncated: return "truncated";
  }
  return "?";
}

void write_step_log_header(std::ostream& out) {
  out << "episode\tt\tstate\taction\trejected\tpre\tpost\treward\tpenalties\tcompromised"
         "\test_ratio\tdelta_d\tf\tb_r\td_r\tenergy\n";
}

void write_step_log(std::ostream& out, int episode, const StepLog& s) {
  char buf[256];
  std::string rejected;
  for (std::size_t i = 0; i < s.rejected.size(); ++i) {
    if (i) rejected += ',';
    rejected += std::to_string(s.rejected[i]);
  }
  if (rejected.empty()) rejected = "-";
  const char* pre = s.rejected.empty() ? "pass" : (s.pre_unknown ? "retry_unknown" : "retry");
  std::snprintf(buf, sizeof buf, "%.6f\t%.6f\t%d\t%.6f\t%.6f\t%.6f\t%d\t%d\t%.6f", s.reward,
                s.penalties, s.compromised, s.estimated_ratio, s.delta_d, s.f, s.b_r, s.d_r,
                s.energy);
  out << episode << '\t' << s.t << '\t' << s.state << '\t' << s.action << '\t' << rejected
      << '\t' << pre << '\t' << (s.post_ok ? "pass" : "violated") << '\t' << buf << '\n';
}

DefenseAgent::DefenseAgent(const AgentConfig& config, std::shared_ptr<const Topology> topology,
                           ConstraintSet constraints, ActorCritic policy)
    : config_(config),
      topology_(std::move(topology)),
      constraints_(std::move(constraints)),
      policy_(std::move(policy)) {
  e_budget_ = formulation_params(*topology_, config_.env).e_budget;
}

std::vector<std::uint8_t> DefenseAgent::initial_assignment() {
  if (!config_.pre_sat)
    return greedy_unchecked_assignment(*topology_, config_.env.f_init, e_budget_);
  const SatResult& r = cache_.solve(constraints_, config_.env.f_init, config_.solver);
  if (!r.sat())
    throw ConfigError("no detector assignment satisfies the constraints at env.f_init");
  return r.assignment;
}

PreCheck DefenseAgent::gate(int action, int state, const EnvState& env) {
  if (config_.pre_sat)
    return check_pre(action, state, env, constraints_, config_.steps, &cache_, config_.solver);
  PreCheck pass;
  pass.satisfied = true;
  pass.assignment = action_class(action) == ActionClass::Ratio
                        ? greedy_unchecked_assignment(
                              *topology_, ratio_after(action, env.f, config_.steps), e_budget_)
                        : env.enabled;
  return pass;
}

StepResult DefenseAgent::run_time_sequence(Simulation& sim, Rng& rng) {
  EnvState& env = sim.mutable_state();
  StepResult out;
  StepLog& log = out.log;

  const double est = estimate_compromised_ratio(sim.observation(), env.delta_d);
  const int s = characterize(est, env.f, env.terminal, config_.bins);
  log.t = env.t;
  log.state = s;
  log.estimated_ratio = est;

  const bool greedy = !learning_ && config_.eval_greedy;
  ActionMask mask;
  SampledAction chosen;
  double value = 0.0;
  PreCheck pass;
  for (int attempt = 0;; ++attempt) {
    const PolicyOutput po = policy_.forward_state(s);
    SampledAction a;
    if (attempt >= config_.ppo.retry_cap) {
      a.action = kDoNothingAction;
      a.log_prob = std::log(std::max(po.probs[kDoNothingAction], 1e-300));
    } else {
      a = greedy ? greedy_action(po.probs, mask) : sample_action(po.probs, mask, rng);
    }
    PreCheck pc = gate(a.action, s, env);
    if (pc.satisfied) {
      chosen = a;
      value = po.value;
      pass = std::move(pc);
      break;
    }
    const double pen = compute_penalty(PenaltyKind::Pre, 0.0, config_.reward);
    if (learning_) {
      penalty_update(policy_, s, a.action, pen, config_.ppo);
      stats_.record_outcome(s, a.action, {OutcomeKind::PrePenalty, 0.0});
    }
    Record rec;
    rec.state = s;
    rec.action = a.action;
    rec.log_prob_old = a.log_prob;
    rec.reward = pen;
    rec.value_old = po.value;
    rec.next_state = s;
    rec.kind = RecordKind::PreRejected;
    out.records.push_back(rec);
    mask.set(a.action);
    log.rejected.push_back(a.action);
    log.penalties += pen;
    log.pre_unknown = log.pre_unknown || pc.unknown;
  }

  const ActionEffect effect = apply_action(chosen.action, env, sim.observation(), config_.steps);
  env.delta_d = effect.delta_d;
  env.f = effect.f;
  env.enabled = std::move(pass.assignment);
  if (config_.pre_sat) {
    for (const LinearConstraint& c : constraints_.pre)
      if (!c.holds(env.enabled))
        throw std::logic_error("executed assignment violates pre constraint " + c.id);
  }
  const ReimageOutcome reimaged = sim.reimage(effect.targets);
  if (sim.update_terminal() == Terminal::Running) {
    sim.attacker_move();
    sim.update_terminal();
  }
  ++env.t;
  const Observation& obs = sim.observe(reimaged);

  const PostCheck post = check_post(obs, constraints_, config_.reward);
  const double r = post.satisfied
                       ? compute_reward(obs.b_r, obs.d_r, obs.attack_ended, obs.attack_goal,
                                        config_.reward)
                       : compute_penalty(PenaltyKind::Post, post.severity, config_.reward);
  if (learning_) {
    stats_.record_outcome(s, chosen.action,
                          post.satisfied ? Outcome{OutcomeKind::Reward, r}
                                         : Outcome{OutcomeKind::PostPenalty, 0.0});
  }

  const double next_est = estimate_compromised_ratio(obs, env.delta_d);
  Record rec;
  rec.state = s;
  rec.action = chosen.action;
  rec.log_prob_old = chosen.log_prob;
  rec.reward = r;
  rec.value_old = value;
  rec.done = env.terminal != Terminal::Running;
  rec.episode_end = rec.done || env.t >= config_.env.episode_cap;
  rec.next_state = characterize(next_est, env.f, env.terminal, config_.bins);
  rec.kind = RecordKind::Executed;
  out.records.push_back(rec);

  log.action = chosen.action;
  log.post_ok = post.satisfied;
  log.reward = r;
  log.compromised = compromised_count(env);
  log.delta_d = env.delta_d;
  log.f = env.f;
  log.b_r = obs.b_r;
  log.d_r = obs.d_r;
  log.energy = obs.energy_actual;
  return out;
}

EpisodeResult DefenseAgent::run_episode(std::uint64_t seed, bool keep_log) {
  Simulation sim(topology_, config_.env, config_.attacker, derive_seed(seed, 1));
  Rng rng(derive_seed(seed, 2));
  sim.reset(initial_assignment());

  EpisodeResult res;
  while (sim.state().terminal == Terminal::Running && sim.state().t < config_.env.episode_cap) {
    StepResult step = run_time_sequence(sim, rng);
    for (const Record& rec : step.records) res.total_reward += rec.reward;
    res.pre_rejections += static_cast<int>(step.log.rejected.size());
    if (!step.log.post_ok) ++res.post_violations;
    if (learning_) buffer_.insert(buffer_.end(), step.records.begin(), step.records.end());
    if (keep_log) res.log.push_back(std::move(step.log));
  }
  res.steps_taken = sim.state().t;
  switch (sim.state().terminal) {
    case Terminal::AttackEnd: res.outcome = EpisodeOutcome::AttackEnd; break;
    case Terminal::AttackGoal: res.outcome = EpisodeOutcome::AttackGoal; break;
    case Terminal::Running: res.outcome = EpisodeOutcome::Truncated; break;
  }
  return res;
}

ActorCritic initial_policy(const AgentConfig& config, std::uint64_t seed) {
  ActorCritic net(kNumStates, kNumActions, config.ppo.hidden);
  Rng rng(derive_seed(seed, 0));
  net.init(rng);
  return net;
}

namespace {

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

void check_finite(const ActorCritic& net, int episode, int updates, const UpdateStats& u) {
  if (all_finite(net.actor.params()) && all_finite(net.critic.params())) return;
  throw TrainingAborted("non-finite network parameters after update " + std::to_string(updates) +
                        " (episode " + std::to_string(episode) + ", " +
                        std::to_string(u.minibatches) + " minibatches, " +
                        std::to_string(u.skipped) + " skipped, mean loss " +
                        std::to_string(u.mean_loss) + ")");
}

}  // namespace

TrainResult train(const AgentConfig& config, const World& world, int episodes, std::uint64_t seed) {
  DefenseAgent agent(config, world.topology, world.constraints, initial_policy(config, seed));
  Optimizer opt = Optimizer::for_net(agent.policy());
  Rng update_rng(derive_seed(seed, 3));

  TrainResult res;
  for (int ep = 0; ep < episodes; ++ep) {
    const EpisodeResult e = agent.run_episode(derive_seed(seed, 1000 + ep));
    res.episode_rewards.push_back(e.total_reward);
    res.outcomes.push_back(e.outcome);
    res.steps.push_back(e.steps_taken);
    if (!all_finite(agent.policy().actor.params()))
      throw TrainingAborted("non-finite actor parameters after penalty updates in episode " +
                            std::to_string(ep));
    if (static_cast<int>(agent.buffer().size()) >= config.ppo.horizon) {
      const UpdateStats u = ppo_update(agent.policy(), opt, agent.buffer(), config.ppo, update_rng);
      ++res.updates;
      check_finite(agent.policy(), ep, res.updates, u);
    }
    res.rules_learned += promote_rules(agent.constraints(), agent.stats(), config.learner);
  }
  if (static_cast<int>(agent.buffer().size()) >= config.ppo.minibatch_size) {
    const UpdateStats u = ppo_update(agent.policy(), opt, agent.buffer(), config.ppo, update_rng);
    ++res.updates;
    check_finite(agent.policy(), episodes, res.updates, u);
  }
  res.policy = agent.policy();
  res.constraints = agent.constraints();
  return res;
}

std::vector<double> EvalMetrics::cdf(int cap) const {
  std::vector<double> out(std::max(cap, 0) + 1, 0.0);
  if (episodes == 0) return out;
  std::size_t i = 0;
  for (int t = 0; t <= cap; ++t) {
    while (i < time_to_end.size() && time_to_end[i] <= t) ++i;
    out[t] = static_cast<double>(i) / episodes;
  }
  return out;
}

int EvalMetrics::time_to_end_percentile(double q) const {
  if (episodes == 0) return -1;
  const long rank = std::max(1L, static_cast<long>(std::ceil(q * episodes - 1e-9)));
  if (rank > static_cast<long>(time_to_end.size())) return -1;
  return time_to_end[rank - 1];
}

EvalMetrics evaluate(const ActorCritic& policy, const ConstraintSet& constraints,
                     const AgentConfig& config, const World& world, int n_episodes,
                     std::uint64_t seed, int jobs, std::vector<EpisodeResult>* episodes) {
  std::vector<EpisodeResult> results(std::max(n_episodes, 0));
  jobs = std::clamp(jobs, 1, std::max(n_episodes, 1));

  std::vector<std::exception_ptr> errors(jobs);
  auto worker = [&](int w) {
    try {
      DefenseAgent agent(config, world.topology, constraints, policy);
      agent.set_learning(false);
      for (int i = w; i < n_episodes; i += jobs)
        results[i] = agent.run_episode(derive_seed(seed, 5'000'000 + i), episodes != nullptr);
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  if (jobs == 1) {
    worker(0);
  } else {
    std::vector<std::thread> threads;
    for (int w = 0; w < jobs; ++w) threads.emplace_back(worker, w);
    for (auto& t : threads) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  EvalMetrics m;
  m.episodes = n_episodes;
  if (n_episodes <= 0) return m;
  int ends = 0, goals = 0;
  double reward = 0.0;
  for (const EpisodeResult& r : results) {
    reward += r.total_reward;
    if (r.outcome == EpisodeOutcome::AttackEnd) {
      ++ends;
      m.time_to_end.push_back(r.steps_taken);
    } else if (r.outcome == EpisodeOutcome::AttackGoal) {
      ++goals;
    }
  }
  std::sort(m.time_to_end.begin(), m.time_to_end.end());
  m.success_rate = static_cast<double>(ends) / n_episodes;
  m.goal_rate = static_cast<double>(goals) / n_episodes;
  m.truncation_rate = static_cast<double>(n_episodes - ends - goals) / n_episodes;
  m.mean_reward = reward / n_episodes;
  if (episodes) *episodes = std::move(results);
  return m;
}

}  // namespace csrl
