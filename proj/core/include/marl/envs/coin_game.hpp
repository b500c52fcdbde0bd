#pragma once

#include <memory>

#include "marl/config.hpp"
#include "marl/env.hpp"

namespace marl::envs {

// Two-player 3x3 toroidal gridworld: picking up any coin pays +1, but taking
// the other player's colour costs them -2, making greed collectively
// irrational.  Config: max_steps (default 36).
std::shared_ptr<const Env> make_coin_game(const Config& config);

}  // namespace marl::envs
