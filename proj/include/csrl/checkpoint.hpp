#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "csrl/constraints.hpp"
#include "csrl/ppo.hpp"
#include "csrl/state.hpp"

namespace csrl {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr char kCheckpointMagic[8] = {'C', 'S', 'R', 'L', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ActorCritic net;
  Hyperparams hyper;
  std::vector<ExclusionRule> rules;
};

// Layout (all integers and doubles little-endian, doubles as IEEE-754 bits):
//   magic[8] "CSRLCKPT", u32 version, u32 byte-order mark 0x01020304,
//   f64 gamma clip_eps learning_rate entropy_coef value_coef,
//   i32 epochs minibatch_size horizon retry_cap, u8 normalize_advantages,
//   then actor and critic as: u32 n_sizes, i32 sizes[n_sizes], u64 n_params,
//   f64 params[n_params], then u32 n_rules and per rule i32 state, i32 action,
//   u8 learned.
void save_checkpoint(const std::string& path, const ActorCritic& net, const Hyperparams& hyper,
                     const std::vector<ExclusionRule>& rules = {});
Checkpoint load_checkpoint(const std::string& path);

}  // namespace csrl
