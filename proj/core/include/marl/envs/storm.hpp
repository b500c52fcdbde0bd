#pragma once

#include <memory>
#include <string>

#include "marl/config.hpp"
#include "marl/env.hpp"

namespace marl::envs {

// Spatial-temporal matrix games on an 8x8 grid: agents collect coop/defect
// coins, then fire an interact beam one cell ahead to trigger a matrix-game
// payout whose strategies are sampled from the players' coin inventories.
// Games: "ipd" (prisoner's dilemma) and "matching_pennies".
// Config: max_steps (default 128), n_agents (default 2; >2 is config-gated
// and untested), payoffs (8 numbers: cc_a, cc_b, cd_a, cd_b, dc_a, dc_b,
// dd_a, dd_b overriding the named game's matrix).
std::shared_ptr<const Env> make_storm(const std::string& game, const Config& config);

// Strategy draw used at interactions: cooperate with probability
// coop / (coop + defect).  Exposed so the sampling distribution is testable.
bool storm_strategy_sample(const PrngKey& key, int coop_coins, int defect_coins);

}  // namespace marl::envs
