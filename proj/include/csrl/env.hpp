#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "csrl/random.hpp"

namespace csrl {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A monitored link. Detector ids coincide with connection indices, so each
// connection carries exactly one detector.
struct Connection {
  int a = 0;
  int b = 0;
  double energy_cost = 1.0;
};

struct Incidence {
  int neighbor;
  int detector;
};

struct TopologyParams {
  int n_devices = 100;
  double mean_degree = 4.0;
  double cost_min = 1.0;
  double cost_max = 5.0;
};

class Topology {
 public:
  // Throws ConfigError on self loops, duplicate links, out-of-range endpoints
  // or non-positive costs.
  Topology(int n_devices, std::vector<Connection> connections);

  int n_devices() const { return n_devices_; }
  int n_detectors() const { return static_cast<int>(connections_.size()); }
  std::span<const Connection> connections() const { return connections_; }
  const Connection& connection(int detector) const { return connections_[detector]; }
  std::span<const Incidence> incident(int device) const { return adjacency_[device]; }
  int degree(int device) const { return static_cast<int>(adjacency_[device].size()); }
  double total_cost() const { return total_cost_; }
  bool connected() const;

  friend bool operator==(const Topology& lhs, const Topology& rhs);

 private:
  int n_devices_;
  std::vector<Connection> connections_;
  std::vector<std::vector<Incidence>> adjacency_;
  double total_cost_ = 0.0;
};

// Random spanning tree plus uniformly drawn extra links until the edge count
// reaches round(n * mean_degree / 2). Links are sorted by (a, b) with a < b.
Topology generate_topology(const TopologyParams& params, std::uint64_t seed);

// Text form: "devices N" followed by one "edge a b cost" line per link.
void write_topology(std::ostream& out, const Topology& topology);
Topology read_topology(std::istream& in);

struct EnvConfig {
  TopologyParams topology;
  std::uint64_t topology_seed = 1;
  std::string topology_file;  // overrides generation when non-empty

  double budget_fraction = 0.4;  // e_budget = budget_fraction * total cost
  double e_max_factor = 1.05;    // e_max = e_max_factor * e_budget
  double energy_noise = 0.1;
  double p_compromise = 0.3;
  double k_benign = 4.0;
  double k_naive = 4.0;
  double k_stealthy = 2.0;
  int initial_compromised = 2;
  int episode_cap = 1000;
  int l_min = 1;
  double reimage_loss_max = 100.0;
  double delta_init = 0.95;
  double f_init = 0.5;

  void validate() const;
};

enum class Terminal { Running, AttackGoal, AttackEnd };

const char* to_string(Terminal terminal);

struct EnvState {
  std::vector<std::uint8_t> compromised;  // ground truth, hidden from the agent
  std::vector<std::uint8_t> enabled;      // detector assignment
  double delta_d = 0.95;
  double f = 0.5;
  int t = 0;
  Terminal terminal = Terminal::Running;
};

struct Observation {
  std::vector<std::optional<double>> device_risk;
  double energy_actual = 0.0;
  int b_r = 0;
  int d_r = 0;
  bool attack_ended = false;  // H_t
  bool attack_goal = false;   // H_g
};

struct ReimageOutcome {
  int benign = 0;  // b_r
  int total = 0;   // d_r
};

// Inverse-CDF power-law draw on [0, 1]. Compromised links concentrate near 1
// (smaller shape_k stretches the tail toward 0); benign links mirror the law
// toward 0 using shape_k as the benign exponent.
double risk_score_sample(bool compromised, double shape_k, double u);

// One score per enabled detector (id order), then one energy-noise draw.
// A link scores as compromised if either endpoint is compromised.
Observation emit_observation(const Topology& topology, const EnvState& state,
                             double compromised_shape, double benign_shape,
                             double energy_noise, Rng& rng);

ReimageOutcome apply_reimage(EnvState& state, std::span<const int> targets);

int compromised_count(const EnvState& state);

// Ignores the episode cap; truncation is handled by the episode driver.
Terminal terminal_check(const EnvState& state);

double enabled_energy(const Topology& topology, std::span<const std::uint8_t> enabled);

}  // namespace csrl
