#include "csrl/config.hpp"

#include <array>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <vector>

namespace csrl {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& v) {
  double out = 0.0;
  const char* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw ConfigError("expected a number, got '" + v + "'");
  return out;
}

long long parse_int(const std::string& v) {
  long long out = 0;
  const char* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw ConfigError("expected an integer, got '" + v + "'");
  return out;
}

std::uint64_t parse_u64(const std::string& v) {
  std::uint64_t out = 0;
  const char* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end)
    throw ConfigError("expected a nonnegative integer, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("expected true or false, got '" + v + "'");
}

std::vector<double> parse_list(const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(trim(item)));
  if (out.empty()) throw ConfigError("expected a comma-separated list");
  return out;
}

template <std::size_t N>
std::array<double, N> parse_array(const std::string& v) {
  const std::vector<double> list = parse_list(v);
  if (list.size() != N)
    throw ConfigError("expected " + std::to_string(N) + " comma-separated values");
  std::array<double, N> out;
  std::copy(list.begin(), list.end(), out.begin());
  return out;
}

// shortest form that parses back to the same double
std::string fmt(double x) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, end);
}

template <typename Range>
std::string fmt_list(const Range& r) {
  std::string out;
  for (double x : r) {
    if (!out.empty()) out += ", ";
    out += fmt(x);
  }
  return out;
}

struct Field {
  const char* key;
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

#define CSRL_DOUBLE(KEY, REF) \
  {KEY, [&c](const std::string& v) { REF = parse_double(v); }, [&c] { return fmt(REF); }}
#define CSRL_INT(KEY, REF)                                                             \
  {KEY, [&c](const std::string& v) { REF = static_cast<int>(parse_int(v)); }, [&c] { \
     return std::to_string(REF);                                                       \
   }}
#define CSRL_BOOL(KEY, REF)                                        \
  {KEY, [&c](const std::string& v) { REF = parse_bool(v); }, [&c] { \
     return std::string(REF ? "true" : "false");                     \
   }}

std::vector<Field> fields(ExperimentConfig& c) {
  return {
      CSRL_INT("env.n_devices", c.agent.env.topology.n_devices),
      CSRL_DOUBLE("env.mean_degree", c.agent.env.topology.mean_degree),
      CSRL_DOUBLE("env.cost_min", c.agent.env.topology.cost_min),
      CSRL_DOUBLE("env.cost_max", c.agent.env.topology.cost_max),
      {"env.topology_seed",
       [&c](const std::string& v) { c.agent.env.topology_seed = parse_u64(v); },
       [&c] { return std::to_string(c.agent.env.topology_seed); }},
      {"env.topology_file", [&c](const std::string& v) { c.agent.env.topology_file = v; },
       [&c] { return c.agent.env.topology_file; }},
      CSRL_DOUBLE("env.budget_fraction", c.agent.env.budget_fraction),
      CSRL_DOUBLE("env.e_max_factor", c.agent.env.e_max_factor),
      CSRL_DOUBLE("env.energy_noise", c.agent.env.energy_noise),
      CSRL_DOUBLE("env.p_compromise", c.agent.env.p_compromise),
      CSRL_DOUBLE("env.k_benign", c.agent.env.k_benign),
      CSRL_DOUBLE("env.k_naive", c.agent.env.k_naive),
      CSRL_DOUBLE("env.k_stealthy", c.agent.env.k_stealthy),
      CSRL_INT("env.initial_compromised", c.agent.env.initial_compromised),
      CSRL_INT("env.episode_cap", c.agent.env.episode_cap),
      CSRL_INT("env.l_min", c.agent.env.l_min),
      CSRL_DOUBLE("env.reimage_loss_max", c.agent.env.reimage_loss_max),
      CSRL_DOUBLE("env.delta_init", c.agent.env.delta_init),
      CSRL_DOUBLE("env.f_init", c.agent.env.f_init),
      {"attacker.kind",
       [&c](const std::string& v) { c.agent.attacker.kind = parse_attacker_kind(v); },
       [&c] { return std::string(to_string(c.agent.attacker.kind)); }},
      CSRL_INT("attacker.n_explore", c.agent.attacker.n_explore),
      {"state.ratio_bins", [&c](const std::string& v) { c.agent.bins.ratio_cuts = parse_list(v); },
       [&c] { return fmt_list(c.agent.bins.ratio_cuts); }},
      {"state.detector_bins",
       [&c](const std::string& v) { c.agent.bins.detector_cuts = parse_list(v); },
       [&c] { return fmt_list(c.agent.bins.detector_cuts); }},
      {"actions.threshold_steps",
       [&c](const std::string& v) { c.agent.steps.threshold = parse_array<3>(v); },
       [&c] { return fmt_list(c.agent.steps.threshold); }},
      {"actions.ratio_steps",
       [&c](const std::string& v) { c.agent.steps.ratio = parse_array<3>(v); },
       [&c] { return fmt_list(c.agent.steps.ratio); }},
      CSRL_DOUBLE("constraints.count_slack", c.agent.count_slack),
      {"constraints.node_budget",
       [&c](const std::string& v) { c.agent.solver.node_budget = parse_int(v); },
       [&c] { return std::to_string(c.agent.solver.node_budget); }},
      CSRL_DOUBLE("reward.c_r", c.agent.reward.c_r),
      CSRL_DOUBLE("reward.c_i", c.agent.reward.c_i),
      CSRL_DOUBLE("reward.c_v", c.agent.reward.c_v),
      CSRL_DOUBLE("reward.i_w", c.agent.reward.i_w),
      CSRL_DOUBLE("reward.p_pre_base", c.agent.reward.p_pre_base),
      CSRL_DOUBLE("reward.p_post_base", c.agent.reward.p_post_base),
      CSRL_DOUBLE("ppo.gamma", c.agent.ppo.gamma),
      CSRL_DOUBLE("ppo.clip_eps", c.agent.ppo.clip_eps),
      CSRL_DOUBLE("ppo.learning_rate", c.agent.ppo.learning_rate),
      CSRL_DOUBLE("ppo.entropy_coef", c.agent.ppo.entropy_coef),
      CSRL_DOUBLE("ppo.value_coef", c.agent.ppo.value_coef),
      CSRL_INT("ppo.epochs", c.agent.ppo.epochs),
      CSRL_INT("ppo.minibatch_size", c.agent.ppo.minibatch_size),
      CSRL_INT("ppo.horizon", c.agent.ppo.horizon),
      CSRL_INT("ppo.retry_cap", c.agent.ppo.retry_cap),
      CSRL_BOOL("ppo.normalize_advantages", c.agent.ppo.normalize_advantages),
      {"ppo.hidden",
       [&c](const std::string& v) {
         c.agent.ppo.hidden.clear();
         for (double x : parse_list(v)) {
           if (x != static_cast<int>(x)) throw ConfigError("ppo.hidden takes integer widths");
           c.agent.ppo.hidden.push_back(static_cast<int>(x));
         }
       },
       [&c] {
         std::string out;
         for (int h : c.agent.ppo.hidden) out += (out.empty() ? "" : ", ") + std::to_string(h);
         return out;
       }},
      CSRL_INT("learner.m_events", c.agent.learner.m_events),
      CSRL_DOUBLE("learner.violation_ratio", c.agent.learner.violation_ratio),
      CSRL_INT("run.episodes", c.run.episodes),
      CSRL_INT("run.eval_episodes", c.run.eval_episodes),
      {"run.seed", [&c](const std::string& v) { c.run.seed = parse_u64(v); },
       [&c] { return std::to_string(c.run.seed); }},
      {"run.out", [&c](const std::string& v) { c.run.out = v; }, [&c] { return c.run.out; }},
      {"run.disable_pre_sat", [&c](const std::string& v) { c.agent.pre_sat = !parse_bool(v); },
       [&c] { return std::string(c.agent.pre_sat ? "false" : "true"); }},
      CSRL_BOOL("run.eval_greedy", c.agent.eval_greedy),
  };
}

#undef CSRL_DOUBLE
#undef CSRL_INT
#undef CSRL_BOOL

}  // namespace

void ExperimentConfig::validate() const {
  agent.validate();
  if (run.episodes < 0) throw ConfigError("run.episodes must be >= 0");
  if (run.eval_episodes < 0) throw ConfigError("run.eval_episodes must be >= 0");
}

void set_config_value(ExperimentConfig& config, const std::string& key, const std::string& value) {
  for (Field& f : fields(config)) {
    if (key != f.key) continue;
    try {
      f.set(value);
    } catch (const ConfigError& e) {
      throw ConfigError(key + ": " + e.what());
    }
    return;
  }
  throw ConfigError("unknown key '" + key + "'");
}

ExperimentConfig parse_config(std::istream& in, const std::string& source) {
  ExperimentConfig config;
  std::set<std::string> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(lineno) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!seen.insert(key).second) throw ConfigError(where + "duplicate key '" + key + "'");
    try {
      set_config_value(config, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  config.validate();
  return config;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  return parse_config(in, path);
}

void write_config(std::ostream& out, const ExperimentConfig& config) {
  ExperimentConfig copy = config;
  for (Field& f : fields(copy)) out << f.key << " = " << f.get() << '\n';
}

}  // namespace csrl
