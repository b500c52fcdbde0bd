#pragma once

#include <memory>
#include <string>
#include <vector>

#include "marl/config.hpp"
#include "marl/env.hpp"

namespace marl::envs {

// Two-cook kitchen coordination: fetch onions, fill pots (3 onions, timed
// cook), plate the soup, deliver it for a shared +20.  Five classic layouts
// plus custom text maps.  Rewards are delivery-only; the standard shaping
// signals (+3 onion into pot, +3 plate pickup, +5 soup pickup) are emitted
// per agent in infos["shaped_reward"] for trainers to anneal.
// Config: layout (text map overriding the named one), max_steps (default
// 400), cook_time (default 20), delivery_reward (default 20), shaping_onion /
// shaping_plate / shaping_soup (defaults 3/3/5), random_conflict_resolution
// (default false: two agents entering one cell both stay put).
std::shared_ptr<const Env> make_overcooked(const std::string& layout_name, const Config& config);

std::vector<std::string> overcooked_layout_names();

// Named layout as its text map (legend: X wall/counter, O onion pile, P pot,
// D plate pile, S serving window, digits player spawns, space floor).
std::string overcooked_layout_text(const std::string& layout_name);

// Shaping recomputed from two consecutive states (equals what step() put in
// infos["shaped_reward"] for the transition).
AgentMap<double> overcooked_shaped_reward(const Env& env, const EnvState& prev,
                                          const EnvState& next);

}  // namespace marl::envs
