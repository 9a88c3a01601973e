#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <gtest/gtest.h>

#include "csrl/agent.hpp"

namespace csrl {
namespace {

AgentConfig small_config() {
  AgentConfig c;
  c.env.topology = {20, 4.0, 1.0, 5.0};
  c.env.topology_seed = 3;
  c.env.episode_cap = 200;
  c.ppo.horizon = 64;
  c.ppo.minibatch_size = 16;
  return c;
}

// Replaces the actor's output biases and zeroes the output weights so the
// policy is the same in every state.
void fix_logits(ActorCritic& net, const std::vector<double>& logits) {
  const auto& sizes = net.actor.layer_sizes();
  const std::size_t fan_in = sizes[sizes.size() - 2];
  auto p = net.actor.params();
  const std::size_t n = logits.size();
  std::fill(p.end() - static_cast<long>(n * fan_in + n), p.end() - static_cast<long>(n), 0.0);
  std::copy(logits.begin(), logits.end(), p.end() - static_cast<long>(n));
}

std::vector<double> peaked(int action, double height = 50.0) {
  std::vector<double> l(kNumActions, 0.0);
  l[action] = height;
  return l;
}

TEST(ApplyAction, Examples) {
  EnvState s;
  s.delta_d = 0.95;
  s.f = 0.5;
  Observation obs;
  obs.device_risk = {0.99, 0.9, std::nullopt, 0.86, 0.84, 0.95};
  const ActionSteps steps;

  ActionEffect e = apply_action(2, s, obs, steps);
  EXPECT_NEAR(e.delta_d, 0.85, 1e-12);
  EXPECT_EQ(e.targets, (std::vector<int>{0, 1, 3, 5}));
  EXPECT_FALSE(e.resolve_detectors);
  EXPECT_EQ(e.f, 0.5);

  e = apply_action(kReimageAction, s, obs, steps);
  EXPECT_EQ(e.delta_d, 0.95);
  EXPECT_EQ(e.targets, (std::vector<int>{0, 5}));

  e = apply_action(5, s, obs, steps);
  EXPECT_EQ(e.delta_d, 1.0);
  EXPECT_TRUE(e.targets.empty());

  e = apply_action(11, s, obs, steps);
  EXPECT_TRUE(e.resolve_detectors);
  EXPECT_NEAR(e.f, 0.75, 1e-12);
  EXPECT_TRUE(e.targets.empty());

  e = apply_action(kDoNothingAction, s, obs, steps);
  EXPECT_EQ(e.delta_d, 0.95);
  EXPECT_EQ(e.f, 0.5);
  EXPECT_TRUE(e.targets.empty());
  EXPECT_FALSE(e.resolve_detectors);
}

TEST(GreedyUnchecked, CheapestFirstWithinBudget) {
  const Topology t(4, {{0, 1, 3.0}, {1, 2, 1.0}, {2, 3, 2.0}, {0, 3, 5.0}});
  EXPECT_EQ(greedy_unchecked_assignment(t, 0.5, 100.0), (std::vector<std::uint8_t>{0, 1, 1, 0}));
  EXPECT_EQ(greedy_unchecked_assignment(t, 0.5, 2.5), (std::vector<std::uint8_t>{0, 1, 0, 0}));
  EXPECT_EQ(greedy_unchecked_assignment(t, 1.0, 100.0), (std::vector<std::uint8_t>{1, 1, 1, 1}));
  EXPECT_EQ(greedy_unchecked_assignment(t, 0.0, 100.0), (std::vector<std::uint8_t>{0, 0, 0, 0}));
}

struct Fixture {
  AgentConfig config = small_config();
  World world = build_world(config);
};

ConstraintSet exclude_everywhere(const ConstraintSet& cs, const std::vector<int>& actions) {
  std::vector<ConstraintItem> add;
  for (int s = 0; s < kNumRatioLevels * kNumDetectorLevels; ++s)
    for (int a : actions) add.push_back(ExclusionRule{s, a, RuleOrigin::UserGiven});
  return update_set(cs, add, {});
}

TEST(TimeSequence, RejectionThenExecution) {
  Fixture fx;
  ActorCritic net = initial_policy(fx.config, 1);
  fix_logits(net, peaked(5));
  DefenseAgent agent(fx.config, fx.world.topology, exclude_everywhere(fx.world.constraints, {5}),
                     net);
  agent.set_learning(false);
  Simulation sim(fx.world.topology, fx.config.env, fx.config.attacker, 11);
  sim.reset(agent.initial_assignment());
  Rng rng(12);
  const StepResult r = agent.run_time_sequence(sim, rng);
  ASSERT_EQ(r.records.size(), 2u);
  EXPECT_EQ(r.records[0].kind, RecordKind::PreRejected);
  EXPECT_EQ(r.records[0].action, 5);
  EXPECT_EQ(r.records[0].reward, compute_penalty(PenaltyKind::Pre, 0.0, fx.config.reward));
  EXPECT_EQ(r.records[1].kind, RecordKind::Executed);
  EXPECT_NE(r.records[1].action, 5);
  EXPECT_EQ(r.log.rejected, (std::vector<int>{5}));
  EXPECT_EQ(sim.state().t, 1);
}

TEST(TimeSequence, AllExcludedFallsBackToDoNothing) {
  Fixture fx;
  std::vector<double> logits(kNumActions);
  for (int a = 0; a < kNumActions; ++a) logits[a] = 20.0 - a;
  logits[kDoNothingAction] = -20.0;
  ActorCritic net = initial_policy(fx.config, 1);
  fix_logits(net, logits);
  std::vector<int> all(kDoNothingAction);
  std::iota(all.begin(), all.end(), 0);
  const ConstraintSet cs = exclude_everywhere(fx.world.constraints, all);

  DefenseAgent agent(fx.config, fx.world.topology, cs, net);
  agent.set_learning(false);
  Simulation sim(fx.world.topology, fx.config.env, fx.config.attacker, 11);
  sim.reset(agent.initial_assignment());
  Rng rng(1);
  const StepResult r = agent.run_time_sequence(sim, rng);
  EXPECT_EQ(r.log.rejected, all);
  EXPECT_EQ(r.log.action, kDoNothingAction);
  EXPECT_EQ(r.records.size(), 14u);
  EXPECT_EQ(sim.state().t, 1);

  AgentConfig capped = fx.config;
  capped.ppo.retry_cap = 3;
  DefenseAgent short_agent(capped, fx.world.topology, cs, net);
  short_agent.set_learning(false);
  Simulation sim2(fx.world.topology, fx.config.env, fx.config.attacker, 11);
  sim2.reset(short_agent.initial_assignment());
  const StepResult r2 = short_agent.run_time_sequence(sim2, rng);
  EXPECT_EQ(r2.log.rejected, (std::vector<int>{0, 1, 2}));
  EXPECT_EQ(r2.log.action, kDoNothingAction);
}

TEST(TimeSequence, PenaltyUpdateOnlyWhenLearning) {
  Fixture fx;
  ActorCritic net = initial_policy(fx.config, 1);
  fix_logits(net, peaked(5, 5.0));
  const ConstraintSet cs = exclude_everywhere(fx.world.constraints, {5});
  for (bool learning : {false, true}) {
    DefenseAgent agent(fx.config, fx.world.topology, cs, net);
    agent.set_learning(learning);
    Simulation sim(fx.world.topology, fx.config.env, fx.config.attacker, 11);
    sim.reset(agent.initial_assignment());
    const int s = characterize(
        estimate_compromised_ratio(sim.observation(), sim.state().delta_d), sim.state().f,
        sim.state().terminal);
    const double before = agent.policy().forward_state(s).probs[5];
    Rng rng(2);
    const StepResult r = agent.run_time_sequence(sim, rng);
    const double after = agent.policy().forward_state(s).probs[5];
    const int rejections = static_cast<int>(r.log.rejected.size());
    if (learning && rejections > 0) {
      EXPECT_LT(after, before);
      EXPECT_EQ(agent.stats().at(s, 5).violations, rejections);
    } else {
      EXPECT_EQ(after, before);
    }
  }
}

TEST(Episode, InvariantsAlongTrajectory) {
  Fixture fx;
  DefenseAgent agent(fx.config, fx.world.topology, fx.world.constraints,
                     initial_policy(fx.config, 4));
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Simulation sim(fx.world.topology, fx.config.env, fx.config.attacker, derive_seed(seed, 1));
    sim.reset(agent.initial_assignment());
    Rng rng(derive_seed(seed, 2));
    int steps = 0;
    while (sim.state().terminal == Terminal::Running && sim.state().t < fx.config.env.episode_cap) {
      const int t_before = sim.state().t;
      const StepResult r = agent.run_time_sequence(sim, rng);
      ++steps;
      EXPECT_EQ(sim.state().t, t_before + 1);
      ASSERT_FALSE(r.records.empty());
      EXPECT_EQ(r.records.back().kind, RecordKind::Executed);
      for (std::size_t i = 0; i + 1 < r.records.size(); ++i)
        EXPECT_EQ(r.records[i].kind, RecordKind::PreRejected);
      for (const LinearConstraint& c : agent.constraints().pre)
        EXPECT_TRUE(c.holds(sim.state().enabled)) << c.id;
      const auto [lo, hi] = count_window(sim.state().f, fx.world.topology->n_detectors(),
                                         fx.config.count_slack);
      const int on = static_cast<int>(
          std::count(sim.state().enabled.begin(), sim.state().enabled.end(), 1));
      EXPECT_GE(on, lo);
      EXPECT_LE(on, hi);
    }
    EXPECT_EQ(steps, sim.state().t);
  }
}

TEST(Episode, TotalRewardIsBufferSum) {
  Fixture fx;
  DefenseAgent agent(fx.config, fx.world.topology, fx.world.constraints,
                     initial_policy(fx.config, 5));
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    agent.buffer().clear();
    const EpisodeResult e = agent.run_episode(seed);
    double sum = 0.0;
    int executed = 0, rejected = 0;
    for (const Record& r : agent.buffer()) {
      sum += r.reward;
      executed += r.kind == RecordKind::Executed;
      rejected += r.kind == RecordKind::PreRejected;
    }
    EXPECT_NEAR(e.total_reward, sum, 1e-9);
    EXPECT_EQ(executed, e.steps_taken);
    EXPECT_EQ(rejected, e.pre_rejections);
    EXPECT_TRUE(agent.buffer().back().episode_end);
  }
}

TEST(Episode, IdleDefenderLosesAtCertainSpread) {
  Fixture fx;
  fx.config.env.p_compromise = 1.0;
  ActorCritic net = initial_policy(fx.config, 1);
  fix_logits(net, peaked(kDoNothingAction));
  DefenseAgent agent(fx.config, fx.world.topology, fx.world.constraints, net);
  agent.set_learning(false);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const EpisodeResult e = agent.run_episode(seed, true);
    EXPECT_EQ(e.outcome, EpisodeOutcome::AttackGoal);
    for (const StepLog& s : e.log) EXPECT_EQ(s.action, kDoNothingAction);
  }
}

TEST(Episode, NothingCompromisedEndsImmediately) {
  Fixture fx;
  fx.config.env.initial_compromised = 0;
  DefenseAgent agent(fx.config, fx.world.topology, fx.world.constraints,
                     initial_policy(fx.config, 1));
  const EpisodeResult e = agent.run_episode(9);
  EXPECT_EQ(e.outcome, EpisodeOutcome::AttackEnd);
  EXPECT_EQ(e.steps_taken, 0);
  EXPECT_EQ(e.total_reward, 0.0);
}

TEST(Episode, CapTruncates) {
  Fixture fx;
  fx.config.env.episode_cap = 1;
  fx.config.env.p_compromise = 0.0;
  ActorCritic net = initial_policy(fx.config, 1);
  fix_logits(net, peaked(kDoNothingAction));
  DefenseAgent agent(fx.config, fx.world.topology, fx.world.constraints, net);
  const EpisodeResult e = agent.run_episode(2);
  EXPECT_EQ(e.outcome, EpisodeOutcome::Truncated);
  EXPECT_EQ(e.steps_taken, 1);
  EXPECT_TRUE(agent.buffer().back().episode_end);
  EXPECT_FALSE(agent.buffer().back().done);
}

TEST(Episode, DeterministicForSeed) {
  Fixture fx;
  auto run = [&] {
    DefenseAgent agent(fx.config, fx.world.topology, fx.world.constraints,
                       initial_policy(fx.config, 6));
    std::ostringstream out;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const EpisodeResult e = agent.run_episode(seed, true);
      for (const StepLog& s : e.log) write_step_log(out, static_cast<int>(seed), s);
    }
    return out.str();
  };
  EXPECT_EQ(run(), run());
}

TEST(StepLogFormat, SixteenColumns) {
  std::ostringstream out;
  write_step_log_header(out);
  StepLog s;
  s.rejected = {3, 9};
  write_step_log(out, 4, s);
  std::istringstream in(out.str());
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(std::count(header.begin(), header.end(), '\t'), 15);
  EXPECT_EQ(std::count(row.begin(), row.end(), '\t'), 15);
  EXPECT_NE(row.find("\t3,9\tretry\tpass\t"), std::string::npos);
}

TEST(Train, ZeroEpisodesReturnsInitialPolicy) {
  Fixture fx;
  const TrainResult r = train(fx.config, fx.world, 0, 8);
  const ActorCritic init = initial_policy(fx.config, 8);
  EXPECT_TRUE(std::equal(init.actor.params().begin(), init.actor.params().end(),
                         r.policy.actor.params().begin()));
  EXPECT_TRUE(r.episode_rewards.empty());
  EXPECT_EQ(r.updates, 0);
  EXPECT_TRUE(equivalent(r.constraints, fx.world.constraints));
}

TEST(Train, ShapesAndDeterminism) {
  Fixture fx;
  const TrainResult a = train(fx.config, fx.world, 12, 9);
  const TrainResult b = train(fx.config, fx.world, 12, 9);
  EXPECT_EQ(a.episode_rewards.size(), 12u);
  EXPECT_EQ(a.outcomes.size(), 12u);
  EXPECT_EQ(a.steps.size(), 12u);
  EXPECT_GE(a.updates, 1);
  EXPECT_EQ(a.episode_rewards, b.episode_rewards);
  EXPECT_TRUE(std::equal(a.policy.actor.params().begin(), a.policy.actor.params().end(),
                         b.policy.actor.params().begin()));
}

TEST(Evaluate, EmptyRun) {
  Fixture fx;
  const EvalMetrics m = evaluate(initial_policy(fx.config, 1), fx.world.constraints, fx.config,
                                 fx.world, 0, 1);
  EXPECT_EQ(m.episodes, 0);
  EXPECT_EQ(m.success_rate, 0.0);
  const auto cdf = m.cdf(5);
  EXPECT_EQ(cdf, std::vector<double>(6, 0.0));
  EXPECT_EQ(m.time_to_end_percentile(0.5), -1);
}

TEST(Evaluate, RatesAndCdf) {
  Fixture fx;
  const ActorCritic net = initial_policy(fx.config, 2);
  const EvalMetrics m = evaluate(net, fx.world.constraints, fx.config, fx.world, 40, 3);
  EXPECT_NEAR(m.success_rate + m.goal_rate + m.truncation_rate, 1.0, 1e-12);
  const auto cdf = m.cdf(fx.config.env.episode_cap);
  for (std::size_t t = 1; t < cdf.size(); ++t) EXPECT_GE(cdf[t], cdf[t - 1]);
  EXPECT_NEAR(cdf.back(), m.success_rate, 1e-12);
  EXPECT_TRUE(std::is_sorted(m.time_to_end.begin(), m.time_to_end.end()));
  EXPECT_EQ(static_cast<double>(m.time_to_end.size()) / 40, m.success_rate);

  const EvalMetrics threaded = evaluate(net, fx.world.constraints, fx.config, fx.world, 40, 3, 3);
  EXPECT_EQ(threaded.time_to_end, m.time_to_end);
  EXPECT_EQ(threaded.mean_reward, m.mean_reward);
}

TEST(Evaluate, PercentileNearestRank) {
  EvalMetrics m;
  m.episodes = 4;
  m.time_to_end = {2, 3, 7};
  EXPECT_EQ(m.time_to_end_percentile(0.25), 2);
  EXPECT_EQ(m.time_to_end_percentile(0.5), 3);
  EXPECT_EQ(m.time_to_end_percentile(0.75), 7);
  EXPECT_EQ(m.time_to_end_percentile(0.95), -1);
  EXPECT_EQ(m.cdf(3), (std::vector<double>{0.0, 0.0, 0.25, 0.5}));
}

TEST(AgentConfigTest, Validation) {
  AgentConfig c = small_config();
  EXPECT_NO_THROW(c.validate());
  c.attacker.n_explore = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  c.steps.ratio[1] = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  c.count_slack = -0.1;
  EXPECT_THROW(c.validate(), ConfigError);
}

}  // namespace
}  // namespace csrl
