#include "csrl/attack.hpp"

#include <algorithm>
#include <utility>

namespace csrl {

const char* to_string(AttackerKind kind) {
  switch (kind) {
    case AttackerKind::Naive: return "naive";
    case AttackerKind::Stealthy: return "stealthy";
    case AttackerKind::Aggressive: return "aggressive";
  }
  return "?";
}

AttackerKind parse_attacker_kind(const std::string& text) {
  if (text == "naive") return AttackerKind::Naive;
  if (text == "stealthy") return AttackerKind::Stealthy;
  if (text == "aggressive") return AttackerKind::Aggressive;
  throw ConfigError("unknown attacker kind '" + text + "'");
}

int exploration_budget(const AttackerConfig& config) {
  return config.kind == AttackerKind::Stealthy ? config.n_explore / 2 : config.n_explore;
}

double compromised_shape(AttackerKind kind, const EnvConfig& env) {
  return kind == AttackerKind::Naive ? env.k_naive : env.k_stealthy;
}

namespace {

int open_neighbors(const Topology& topology, const EnvState& state, int v) {
  int open = 0;
  for (const Incidence& inc : topology.incident(v))
    if (!state.compromised[inc.neighbor]) ++open;
  return open;
}

}  // namespace

std::vector<int> select_exploration_set(const AttackerConfig& config, const Topology& topology,
                                        const EnvState& state, Rng& rng) {
  std::vector<int> pool;
  for (int v = 0; v < topology.n_devices(); ++v)
    if (state.compromised[v]) pool.push_back(v);
  const std::size_t budget =
      std::min<std::size_t>(static_cast<std::size_t>(exploration_budget(config)), pool.size());

  std::vector<int> chosen;
  if (config.kind == AttackerKind::Naive) {
    // partial Fisher-Yates
    for (std::size_t i = 0; i < budget; ++i) {
      const std::size_t j = i + uniform_index(rng, pool.size() - i);
      std::swap(pool[i], pool[j]);
    }
    chosen.assign(pool.begin(), pool.begin() + static_cast<long>(budget));
  } else {
    std::vector<std::pair<int, int>> ranked;  // (-open, id)
    ranked.reserve(pool.size());
    for (int v : pool) ranked.emplace_back(-open_neighbors(topology, state, v), v);
    std::sort(ranked.begin(), ranked.end());
    for (std::size_t i = 0; i < budget; ++i) chosen.push_back(ranked[i].second);
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

std::vector<int> attempt_propagation(const Topology& topology, const EnvState& state,
                                     std::span<const int> exploration, double p_compromise,
                                     Rng& rng) {
  std::vector<int> hits;
  std::vector<int> open;
  for (int v : exploration) {
    open.clear();
    for (const Incidence& inc : topology.incident(v))
      if (!state.compromised[inc.neighbor]) open.push_back(inc.neighbor);
    if (open.empty()) continue;
    const int target = open[uniform_index(rng, open.size())];
    if (uniform01(rng) < p_compromise) hits.push_back(target);
  }
  std::sort(hits.begin(), hits.end());
  hits.erase(std::unique(hits.begin(), hits.end()), hits.end());
  return hits;
}

}  // namespace csrl
