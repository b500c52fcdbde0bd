#pragma once

// Parameter-sharing adapter: one network serves every agent, so observations
// are zero-padded to the widest agent observation and (for multi-agent envs)
// suffixed with a one-hot agent id; action heads are sized to the widest
// action space, with the per-agent legal mask zeroing the padding slots.

#include <cstdint>
#include <string>
#include <vector>

#include "marl/env.hpp"

namespace marl {

struct TeamLayout {
  std::vector<std::string> agents;
  std::vector<int> agent_actions;  // true action count per agent
  int obs_dim = 0;                 // widest raw observation
  int in_dim = 0;                  // obs_dim + (one-hot width when n_agents > 1)
  int n_actions = 0;               // widest action space

  static TeamLayout from_env(const Env& env);  // SchemaError on non-discrete actions

  int n_agents() const { return int(agents.size()); }
  bool one_hot() const { return agents.size() > 1; }

  // Writes exactly in_dim floats: padded obs then the agent one-hot.
  void write_input(const Obs& obs, int agent_idx, float* dst) const;

  // Writes exactly n_actions mask bytes: env legality then zero padding.
  void write_legal(const Env& env, const EnvState& state, int agent_idx, uint8_t* dst) const;
};

}  // namespace marl
