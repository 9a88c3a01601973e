#pragma once

#include <span>
#include <string>
#include <vector>

#include "csrl/env.hpp"
#include "csrl/random.hpp"

namespace csrl {

enum class AttackerKind { Naive, Stealthy, Aggressive };

struct AttackerConfig {
  AttackerKind kind = AttackerKind::Naive;
  int n_explore = 5;  // N
};

const char* to_string(AttackerKind kind);
// Accepts "naive", "stealthy", "aggressive"; throws ConfigError otherwise.
AttackerKind parse_attacker_kind(const std::string& text);

// Naive and Aggressive explore N nodes, Stealthy explores floor(N / 2).
int exploration_budget(const AttackerConfig& config);

// Stealthy and Aggressive attackers emit scores with the stealthy exponent.
double compromised_shape(AttackerKind kind, const EnvConfig& env);

// Returns the explored compromised devices in ascending id order.
std::vector<int> select_exploration_set(const AttackerConfig& config, const Topology& topology,
                                        const EnvState& state, Rng& rng);

// Each explored node attacks one uniformly chosen uncompromised neighbour and
// succeeds with probability p. Reads the pre-move state only; the caller
// applies the returned ids (ascending, unique).
std::vector<int> attempt_propagation(const Topology& topology, const EnvState& state,
                                     std::span<const int> exploration, double p_compromise,
                                     Rng& rng);

}  // namespace csrl
