#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "csrl/agent.hpp"

namespace csrl {

struct RunConfig {
  int episodes = 200;
  int eval_episodes = 500;
  std::uint64_t seed = 1;
  std::string out = "out";
};

struct ExperimentConfig {
  AgentConfig agent;
  RunConfig run;

  void validate() const;
};

// Flat "key = value" lines; '#' starts a comment. Unknown and repeated keys are
// errors. Messages carry "<source>:<line>: ".
ExperimentConfig parse_config(std::istream& in, const std::string& source = "<config>");
ExperimentConfig load_config(const std::string& path);

// Applies one "key=value" override, e.g. from the command line.
void set_config_value(ExperimentConfig& config, const std::string& key, const std::string& value);

// Every key with its current value, in a form parse_config reads back.
void write_config(std::ostream& out, const ExperimentConfig& config);

}  // namespace csrl
