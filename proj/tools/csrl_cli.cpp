#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "csrl/checkpoint.hpp"
#include "csrl/config.hpp"
#include "csrl/experiment.hpp"

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

struct Globals {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out;
  int jobs = 1;
  std::vector<std::string> overrides;
};

csrl::ExperimentConfig resolve(const Globals& g) {
  csrl::ExperimentConfig cfg;
  if (!g.config.empty()) cfg = csrl::load_config(g.config);
  for (const std::string& kv : g.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw csrl::ConfigError("--set expects key=value, got '" + kv + "'");
    csrl::set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (g.seed_set) cfg.run.seed = g.seed;
  if (!g.out.empty()) cfg.run.out = g.out;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constraint-gated PPO defense agent"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "config file (flat key = value)");
  auto* seed_opt = app.add_option("--seed", g.seed, "overrides run.seed");
  app.add_option("--out", g.out, "output directory, overrides run.out");
  app.add_option("--jobs", g.jobs, "parallel evaluation workers")->check(CLI::PositiveNumber);
  app.add_option("--set", g.overrides, "key=value config override (repeatable)");

  auto* train = app.add_subcommand("train", "train a policy; writes learning_curve.csv and checkpoint.bin");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint; writes cdf.csv and summary.csv");
  std::string checkpoint, step_log;
  int eval_n = -1;
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval->add_option("-n,--episodes", eval_n, "overrides run.eval_episodes");
  eval->add_option("--step-log", step_log, "write per-step TSV log");

  auto* ablate = app.add_subcommand("ablate", "pre-sat on vs off; writes compare.csv");
  bool sweep = false;
  int n_seeds = 1;
  ablate->add_flag("--sweep", sweep, "all attackers on 100 and 200 devices");
  ablate->add_option("--seeds", n_seeds, "paired seeds per setting")->check(CLI::PositiveNumber);

  auto* gen = app.add_subcommand("gen-topo", "write a random topology");
  csrl::TopologyParams topo;
  std::uint64_t topo_seed = 1;
  std::string topo_out;
  gen->add_option("-n,--devices", topo.n_devices, "device count")->required();
  gen->add_option("--degree", topo.mean_degree, "mean degree");
  gen->add_option("--topo-seed", topo_seed, "generator seed");
  gen->add_option("-o,--output", topo_out, "topology file")->required();

  auto* policy = app.add_subcommand("policy", "policy tools");
  policy->require_subcommand(1);
  auto* inspect = policy->add_subcommand("inspect", "print per-state action probabilities");
  std::string inspect_ckpt;
  inspect->add_option("checkpoint", inspect_ckpt, "checkpoint file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitConfig;
  }
  g.seed_set = seed_opt->count() > 0;

  try {
    if (*train) {
      csrl::cmd_train(resolve(g), g.jobs, std::cout);
    } else if (*eval) {
      csrl::ExperimentConfig cfg = resolve(g);
      if (eval_n >= 0) cfg.run.eval_episodes = eval_n;
      csrl::cmd_eval(cfg, checkpoint, g.jobs, step_log, std::cout);
    } else if (*ablate) {
      csrl::cmd_ablate(resolve(g), sweep, n_seeds, g.jobs, std::cout);
    } else if (*gen) {
      if (topo.n_devices < 3) throw csrl::ConfigError("--devices must be >= 3");
      csrl::cmd_gen_topo(topo, g.seed_set ? g.seed : topo_seed, topo_out, std::cout);
    } else if (*inspect) {
      csrl::cmd_policy_inspect(inspect_ckpt, std::cout);
    }
  } catch (const csrl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const csrl::ConstraintError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const csrl::CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
