#pragma once

#include <memory>
#include <string>

#include "marl/config.hpp"
#include "marl/env.hpp"

namespace marl::envs {

// Multi-particle 2D point-mass worlds: simple_spread, simple_speaker_listener,
// simple_tag.  25-step episodes, Euler physics with soft contact forces.
// Config: continuous_actions (default false); simple_tag additionally takes
// cooperative_prey_reward (default false) which drops the prey's escape reward
// into a shared predator objective.
std::shared_ptr<const Env> make_mpe(const std::string& scenario, const Config& config);

}  // namespace marl::envs
