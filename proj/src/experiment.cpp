#include "csrl/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "csrl/checkpoint.hpp"

namespace csrl {

namespace {

std::string fixed(double x, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::filesystem::path out_dir(const ExperimentConfig& config) {
  std::filesystem::path dir(config.run.out);
  std::filesystem::create_directories(dir);
  return dir;
}

std::uint64_t eval_seed(std::uint64_t seed) { return derive_seed(seed, 0xE7A1); }

}  // namespace

std::vector<double> normalize_curve(std::span<const double> raw) {
  std::vector<double> out(raw.begin(), raw.end());
  if (raw.empty()) return out;
  const auto [lo_it, hi_it] = std::minmax_element(raw.begin(), raw.end());
  const double lo = *lo_it, hi = *hi_it;
  if (hi > 0.0) {
    for (double& x : out) x /= hi;
  } else if (hi > lo) {
    for (double& x : out) x = (x - lo) / (hi - lo);
  } else {
    std::fill(out.begin(), out.end(), 1.0);
  }
  return out;
}

std::vector<double> smooth_curve(std::span<const double> values, int window) {
  std::vector<double> out(values.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    sum += values[i];
    if (i >= static_cast<std::size_t>(window)) sum -= values[i - window];
    out[i] = sum / static_cast<double>(std::min<std::size_t>(i + 1, window));
  }
  return out;
}

void write_learning_curve(std::ostream& out, std::span<const double> raw) {
  const std::vector<double> norm = normalize_curve(raw);
  out << "episode,raw_reward,normalized_reward\n";
  for (std::size_t i = 0; i < raw.size(); ++i)
    out << i << ',' << fixed(raw[i], 6) << ',' << fixed(norm[i], 6) << '\n';
}

void write_cdf(std::ostream& out, const EvalMetrics& metrics, int cap) {
  const std::vector<double> cdf = metrics.cdf(cap);
  out << "t,fraction\n";
  for (int t = 0; t <= cap; ++t) out << t << ',' << fixed(cdf[t], 6) << '\n';
}

void write_summary(std::ostream& out, const EvalMetrics& m) {
  out << "episodes,success_rate,goal_rate,truncation_rate,mean_reward,median_time_to_end,"
         "p95_time_to_end\n";
  out << m.episodes << ',' << fixed(m.success_rate, 4) << ',' << fixed(m.goal_rate, 4) << ','
      << fixed(m.truncation_rate, 4) << ',' << fixed(m.mean_reward, 6) << ','
      << m.time_to_end_percentile(0.5) << ',' << m.time_to_end_percentile(0.95) << '\n';
}

ConstraintSet with_rules(const ConstraintSet& cs, const std::vector<ExclusionRule>& rules) {
  std::vector<ConstraintItem> add;
  for (const ExclusionRule& r : rules)
    if (!cs.excludes(r.state, r.action)) add.emplace_back(r);
  if (add.empty()) return cs;
  return update_set(cs, add, {});
}

RunOutcome train_and_evaluate(const AgentConfig& config, const World& world, int episodes,
                              int eval_episodes, std::uint64_t seed, int jobs) {
  RunOutcome out;
  out.train = train(config, world, episodes, seed);
  out.eval = evaluate(out.train.policy, out.train.constraints, config, world, eval_episodes,
                      eval_seed(seed), jobs);
  return out;
}

std::vector<AblationRow> run_ablation(const ExperimentConfig& config,
                                      const std::vector<AblationSetting>& settings, int n_seeds,
                                      int jobs, std::ostream* progress) {
  std::vector<AblationRow> rows;
  for (const AblationSetting& s : settings) {
    AgentConfig base = config.agent;
    base.attacker.kind = s.attacker;
    if (base.env.topology_file.empty()) base.env.topology.n_devices = s.devices;
    base.validate();
    const World world = build_world(base);
    for (bool pre_sat : {true, false}) {
      AgentConfig cfg = base;
      cfg.pre_sat = pre_sat;
      AblationRow row;
      row.attacker = s.attacker;
      row.devices = world.topology->n_devices();
      row.pre_sat = pre_sat;
      row.seeds = n_seeds;
      for (int k = 0; k < n_seeds; ++k) {
        const RunOutcome r = train_and_evaluate(cfg, world, config.run.episodes,
                                                config.run.eval_episodes, config.run.seed + k, jobs);
        row.mean_reward += r.eval.mean_reward / n_seeds;
        row.success_rate += r.eval.success_rate / n_seeds;
        row.goal_rate += r.eval.goal_rate / n_seeds;
        if (progress) {
          *progress << to_string(s.attacker) << " devices=" << row.devices
                    << " pre_sat=" << (pre_sat ? 1 : 0) << " seed=" << config.run.seed + k
                    << " mean_reward=" << fixed(r.eval.mean_reward, 3)
                    << " success=" << fixed(r.eval.success_rate, 4) << '\n';
        }
      }
      rows.push_back(row);
    }
  }
  return rows;
}

void write_compare(std::ostream& out, const std::vector<AblationRow>& rows, double i_w) {
  out << "attacker,devices,pre_sat,seeds,mean_reward,normalized_reward,success_rate,goal_rate\n";
  for (const AblationRow& r : rows) {
    out << to_string(r.attacker) << ',' << r.devices << ',' << (r.pre_sat ? 1 : 0) << ','
        << r.seeds << ',' << fixed(r.mean_reward, 6) << ',' << fixed(r.mean_reward / i_w, 6)
        << ',' << fixed(r.success_rate, 4) << ',' << fixed(r.goal_rate, 4) << '\n';
  }
}

void cmd_train(const ExperimentConfig& config, int /*jobs*/, std::ostream& log) {
  config.validate();
  const World world = build_world(config.agent);
  const TrainResult r = train(config.agent, world, config.run.episodes, config.run.seed);
  const auto dir = out_dir(config);

  auto curve = open_out(dir / "learning_curve.csv");
  write_learning_curve(curve, r.episode_rewards);
  std::vector<ExclusionRule> rules = r.constraints.rules;
  save_checkpoint((dir / "checkpoint.bin").string(), r.policy, config.agent.ppo, rules);
  auto cons = open_out(dir / "constraints.txt");
  dump_constraints(cons, r.constraints);
  auto cfg = open_out(dir / "config.txt");
  write_config(cfg, config);

  int ends = 0;
  for (EpisodeOutcome o : r.outcomes) ends += o == EpisodeOutcome::AttackEnd;
  log << "trained " << r.episode_rewards.size() << " episodes, " << r.updates << " updates, "
      << r.rules_learned << " learned rules, " << ends << " attack-end episodes\n";
  log << "wrote " << (dir / "learning_curve.csv").string() << ", checkpoint.bin, constraints.txt\n";
}

void cmd_eval(const ExperimentConfig& config, const std::string& checkpoint, int jobs,
              const std::string& step_log, std::ostream& log) {
  config.validate();
  const Checkpoint ck = load_checkpoint(checkpoint);
  if (ck.net.n_inputs() != kNumStates || ck.net.n_actions() != kNumActions)
    throw CheckpointError("checkpoint network shape does not match the state/action spaces");
  const World world = build_world(config.agent);
  const ConstraintSet cs = with_rules(world.constraints, ck.rules);

  std::vector<EpisodeResult> episodes;
  const EvalMetrics m = evaluate(ck.net, cs, config.agent, world, config.run.eval_episodes,
                                 config.run.seed, jobs, step_log.empty() ? nullptr : &episodes);
  const auto dir = out_dir(config);
  auto cdf = open_out(dir / "cdf.csv");
  write_cdf(cdf, m, config.agent.env.episode_cap);
  auto summary = open_out(dir / "summary.csv");
  write_summary(summary, m);
  if (!step_log.empty()) {
    auto tsv = open_out(step_log);
    write_step_log_header(tsv);
    for (std::size_t i = 0; i < episodes.size(); ++i)
      for (const StepLog& s : episodes[i].log) write_step_log(tsv, static_cast<int>(i), s);
  }
  log << "evaluated " << m.episodes << " episodes: success " << fixed(m.success_rate, 4)
      << ", goal " << fixed(m.goal_rate, 4) << ", mean reward " << fixed(m.mean_reward, 3)
      << '\n';
}

void cmd_ablate(const ExperimentConfig& config, bool sweep, int n_seeds, int jobs,
                std::ostream& log) {
  config.validate();
  std::vector<AblationSetting> settings;
  if (sweep) {
    if (!config.agent.env.topology_file.empty())
      throw ConfigError("--sweep generates its own topologies; unset env.topology_file");
    for (int devices : {100, 200})
      for (AttackerKind k : {AttackerKind::Naive, AttackerKind::Stealthy, AttackerKind::Aggressive})
        settings.push_back({k, devices});
  } else {
    settings.push_back({config.agent.attacker.kind, config.agent.env.topology.n_devices});
  }
  const std::vector<AblationRow> rows = run_ablation(config, settings, n_seeds, jobs, &log);
  const auto dir = out_dir(config);
  auto out = open_out(dir / "compare.csv");
  write_compare(out, rows, config.agent.reward.i_w);
  log << "wrote " << (dir / "compare.csv").string() << '\n';
}

void cmd_gen_topo(const TopologyParams& params, std::uint64_t seed, const std::string& path,
                  std::ostream& log) {
  const Topology topo = generate_topology(params, seed);
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  auto out = open_out(p);
  write_topology(out, topo);
  log << "devices " << topo.n_devices() << " edges " << topo.n_detectors() << " detectors "
      << topo.n_detectors() << " total_cost " << fixed(topo.total_cost(), 6) << '\n';
}

void cmd_policy_inspect(const std::string& checkpoint, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  if (ck.net.n_inputs() != kNumStates || ck.net.n_actions() != kNumActions)
    throw CheckpointError("checkpoint network shape does not match the state/action spaces");
  out << "state\tvalue\tgreedy\tprobs\n";
  for (int s = 0; s < kNumStates; ++s) {
    const PolicyOutput po = ck.net.forward_state(s);
    const int best = static_cast<int>(std::max_element(po.probs.begin(), po.probs.end()) -
                                      po.probs.begin());
    out << s << '\t' << fixed(po.value, 4) << '\t' << action_name(best) << '\t';
    for (int a = 0; a < kNumActions; ++a) out << (a ? "," : "") << fixed(po.probs[a], 4);
    out << '\n';
  }
  for (const ExclusionRule& r : ck.rules)
    out << "rule\t" << r.id() << (r.origin == RuleOrigin::Learned ? "\tlearned" : "") << '\n';
}

}  // namespace csrl
