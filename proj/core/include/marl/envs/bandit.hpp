#pragma once

#include <memory>

#include "marl/config.hpp"
#include "marl/env.hpp"

namespace marl::envs {

// One-agent, one-step bandit with deterministic arm payouts; the smallest
// possible sanity target for value-based learners.
// Config: arm_rewards (default [0.1, 1.0, 0.5, 0.2]).
std::shared_ptr<const Env> make_bandit(const Config& config);

}  // namespace marl::envs
