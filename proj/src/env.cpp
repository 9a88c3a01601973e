#include "csrl/env.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <utility>

namespace csrl {

Topology::Topology(int n_devices, std::vector<Connection> connections)
    : n_devices_(n_devices), connections_(std::move(connections)), adjacency_(n_devices) {
  if (n_devices < 1) throw ConfigError("topology needs at least one device");
  std::set<std::pair<int, int>> seen;
  for (int d = 0; d < n_detectors(); ++d) {
    const Connection& c = connections_[d];
    if (c.a < 0 || c.b < 0 || c.a >= n_devices || c.b >= n_devices)
      throw ConfigError("edge endpoint out of range");
    if (c.a == c.b) throw ConfigError("self loop on device " + std::to_string(c.a));
    if (!(c.energy_cost > 0.0) || !std::isfinite(c.energy_cost))
      throw ConfigError("detector energy cost must be positive");
    if (!seen.emplace(std::min(c.a, c.b), std::max(c.a, c.b)).second)
      throw ConfigError("duplicate edge " + std::to_string(c.a) + "-" + std::to_string(c.b));
    adjacency_[c.a].push_back({c.b, d});
    adjacency_[c.b].push_back({c.a, d});
    total_cost_ += c.energy_cost;
  }
}

bool Topology::connected() const {
  std::vector<std::uint8_t> seen(n_devices_, 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int count = 1;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    for (const Incidence& inc : adjacency_[v]) {
      if (!seen[inc.neighbor]) {
        seen[inc.neighbor] = 1;
        ++count;
        stack.push_back(inc.neighbor);
      }
    }
  }
  return count == n_devices_;
}

bool operator==(const Topology& lhs, const Topology& rhs) {
  if (lhs.n_devices_ != rhs.n_devices_ || lhs.connections_.size() != rhs.connections_.size())
    return false;
  for (std::size_t i = 0; i < lhs.connections_.size(); ++i) {
    const Connection& x = lhs.connections_[i];
    const Connection& y = rhs.connections_[i];
    if (x.a != y.a || x.b != y.b || x.energy_cost != y.energy_cost) return false;
  }
  return true;
}

Topology generate_topology(const TopologyParams& params, std::uint64_t seed) {
  const long n = params.n_devices;
  if (n < 3) throw ConfigError("topology needs at least 3 devices");
  if (!(params.cost_min > 0.0) || params.cost_max < params.cost_min)
    throw ConfigError("detector cost range must satisfy 0 < cost_min <= cost_max");
  const long edges = std::lround(static_cast<double>(n) * params.mean_degree / 2.0);
  if (edges < n - 1)
    throw ConfigError("mean degree too small for a connected graph of " + std::to_string(n) +
                      " devices");
  if (edges > n * (n - 1) / 2)
    throw ConfigError("mean degree exceeds the complete graph on " + std::to_string(n) +
                      " devices");

  Rng rng(seed);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (long i = n - 1; i > 0; --i) std::swap(order[i], order[uniform_index(rng, i + 1)]);

  std::set<std::pair<int, int>> links;
  auto key = [](int a, int b) { return std::make_pair(std::min(a, b), std::max(a, b)); };
  for (long i = 1; i < n; ++i) {
    const int parent = order[uniform_index(rng, i)];
    links.insert(key(order[i], parent));
  }
  while (static_cast<long>(links.size()) < edges) {
    const int a = static_cast<int>(uniform_index(rng, n));
    const int b = static_cast<int>(uniform_index(rng, n));
    if (a != b) links.insert(key(a, b));
  }

  std::vector<Connection> connections;
  connections.reserve(links.size());
  for (const auto& [a, b] : links) {
    // six decimals so the text form reads back to the same doubles
    const double cost = std::round(uniform_real(rng, params.cost_min, params.cost_max) * 1e6) / 1e6;
    connections.push_back({a, b, std::max(cost, 1e-6)});
  }
  return Topology(static_cast<int>(n), std::move(connections));
}

void write_topology(std::ostream& out, const Topology& topology) {
  out << "devices " << topology.n_devices() << '\n';
  char buf[64];
  for (const Connection& c : topology.connections()) {
    std::snprintf(buf, sizeof(buf), "%.6f", c.energy_cost);
    out << "edge " << c.a << ' ' << c.b << ' ' << buf << '\n';
  }
}

Topology read_topology(std::istream& in) {
  std::string line;
  int line_no = 0;
  int n_devices = -1;
  std::vector<Connection> connections;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string word;
    if (!(ls >> word) || word[0] == '#') continue;
    auto fail = [&](const std::string& what) {
      throw ConfigError("topology line " + std::to_string(line_no) + ": " + what);
    };
    if (word == "devices") {
      if (n_devices >= 0) fail("duplicate devices header");
      if (!(ls >> n_devices) || n_devices < 1) fail("bad device count");
    } else if (word == "edge") {
      if (n_devices < 0) fail("edge before devices header");
      Connection c;
      if (!(ls >> c.a >> c.b >> c.energy_cost)) fail("expected 'edge a b cost'");
      connections.push_back(c);
    } else {
      fail("unknown record '" + word + "'");
    }
  }
  if (n_devices < 0) throw ConfigError("topology: missing devices header");
  return Topology(n_devices, std::move(connections));
}

void EnvConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
  };
  require(topology.n_devices >= 3, "env.n_devices must be >= 3");
  require(topology.mean_degree > 0.0, "env.mean_degree must be positive");
  require(budget_fraction > 0.0 && budget_fraction < 1.0,
          "env.budget_fraction must lie in (0, 1) so that not every detector fits the budget");
  require(e_max_factor > 0.0, "env.e_max_factor must be positive");
  require(energy_noise >= 0.0 && energy_noise < 1.0, "env.energy_noise must lie in [0, 1)");
  require(p_compromise > 0.0 && p_compromise <= 1.0, "env.p_compromise must lie in (0, 1]");
  require(k_benign > 1.0 && k_naive > 1.0 && k_stealthy > 1.0,
          "shape exponents must be greater than 1");
  require(initial_compromised >= 0 && 2 * initial_compromised < topology.n_devices,
          "env.initial_compromised must be below half of env.n_devices");
  require(episode_cap >= 1, "env.episode_cap must be positive");
  require(l_min >= 1, "env.l_min must be >= 1");
  require(reimage_loss_max >= 0.0, "env.reimage_loss_max must be nonnegative");
  require(delta_init >= 0.0 && delta_init <= 1.0, "env.delta_init must lie in [0, 1]");
  require(f_init >= 0.0 && f_init <= 1.0, "env.f_init must lie in [0, 1]");
}

const char* to_string(Terminal terminal) {
  switch (terminal) {
    case Terminal::Running: return "running";
    case Terminal::AttackGoal: return "attack_goal";
    case Terminal::AttackEnd: return "attack_end";
  }
  return "?";
}

double risk_score_sample(bool compromised, double shape_k, double u) {
  const double tail = std::pow(u, 1.0 / shape_k);
  return compromised ? tail : 1.0 - tail;
}

Observation emit_observation(const Topology& topology, const EnvState& state,
                             double compromised_shape, double benign_shape,
                             double energy_noise, Rng& rng) {
  const int n = topology.n_devices();
  std::vector<double> sum(n, 0.0);
  std::vector<int> count(n, 0);
  double energy = 0.0;
  for (int d = 0; d < topology.n_detectors(); ++d) {
    if (!state.enabled[d]) continue;
    const Connection& c = topology.connection(d);
    const bool hot = state.compromised[c.a] || state.compromised[c.b];
    const double score =
        risk_score_sample(hot, hot ? compromised_shape : benign_shape, uniform01(rng));
    sum[c.a] += score;
    sum[c.b] += score;
    ++count[c.a];
    ++count[c.b];
    energy += c.energy_cost;
  }
  Observation obs;
  obs.device_risk.resize(n);
  for (int v = 0; v < n; ++v)
    if (count[v] > 0) obs.device_risk[v] = sum[v] / count[v];
  const double nu = uniform_real(rng, -energy_noise, energy_noise);
  obs.energy_actual = energy * (1.0 + nu);
  return obs;
}

ReimageOutcome apply_reimage(EnvState& state, std::span<const int> targets) {
  ReimageOutcome out;
  for (int v : targets) {
    if (!state.compromised[v]) ++out.benign;
    state.compromised[v] = 0;
    ++out.total;
  }
  return out;
}

int compromised_count(const EnvState& state) {
  return static_cast<int>(std::count(state.compromised.begin(), state.compromised.end(), 1));
}

Terminal terminal_check(const EnvState& state) {
  const int hit = compromised_count(state);
  if (hit == 0) return Terminal::AttackEnd;
  if (2 * hit >= static_cast<int>(state.compromised.size())) return Terminal::AttackGoal;
  return Terminal::Running;
}

double enabled_energy(const Topology& topology, std::span<const std::uint8_t> enabled) {
  double e = 0.0;
  for (int d = 0; d < topology.n_detectors(); ++d)
    if (enabled[d]) e += topology.connection(d).energy_cost;
  return e;
}

}  // namespace csrl
