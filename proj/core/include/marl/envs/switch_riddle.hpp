#pragma once

#include <memory>

#include "marl/config.hpp"
#include "marl/env.hpp"

namespace marl::envs {

// Prisoners-and-lightbulb riddle.  Each step one uniformly chosen prisoner
// enters the room, sees the bulb, and may toggle it or announce "all have
// been here".  A correct announcement pays +1 to everyone, a wrong one -1;
// hitting the step cap pays 0.
// Config: n_agents (default 3), max_steps (default 4*n_agents - 6).
std::shared_ptr<const Env> make_switch_riddle(const Config& config);

}  // namespace marl::envs
