#pragma once
// Simplified real-time micromanagement battles between two teams of units.
//
// Units live on a continuous map_size x map_size field (default 32x32). Each
// env step simulates 8 physics ticks of dt = 1/16 s: units move at their
// type's speed, simultaneously fire at their chosen target when it is alive,
// inside attack range (edge-to-edge) and the weapon cooldown has elapsed, and
// overlapping unit discs are pushed apart. Damage is applied against the
// health snapshot taken at the start of each tick, so two last units can
// trade lethal blows in the same tick and produce a draw.
//
// Actions (discrete, per agent): 0 north, 1 south, 2 east, 3 west, 4 stop,
// 5+k attack the k-th opposing unit. Dead agents may send any in-range
// action; it is ignored. Legal-action masks allow moves/stop while alive and
// attacks only on living opponents currently inside attack range.
//
// Rewards are shaped and symmetric: each step a team earns
//   0.5 * (damage dealt to opponent pool) / (initial opponent pool)
// where a team's pool is sum(health/max_health + alive) over its units, plus
// a 0.5 bonus on the step the opposing team is wiped out. A flawless victory
// therefore sums to exactly 1.0; a timeout or mutual-elimination draw pays no
// bonus. smax_reward recomputes the reward map from two adjacent states.
//
// Observations (per agent, zeroed entirely while dead): own features
// [health/max, cooldown/max, x/w, y/h, type one-hot(6)] followed, for every
// other unit (teammates by index first, then opponents), by
// [visible, rel_x/sight, rel_y/sight, health/max, cooldown/max,
//  type one-hot(6), previous action bucket one-hot(6: N,S,E,W,stop,attack)].
// Units outside the observer's sight radius (or dead) are all-zero slots.
// world_state is the global view: 18 floats per unit [alive, x/w, y/h,
// health/max, cooldown/max, team, type one-hot(6), prev action bucket
// one-hot(6)] plus a trailing t/max_steps scalar.
//
// Scenarios: fixed rosters (2s3z, 3s5z, 5m_vs_6m, 10m_vs_11m, 27m_vs_30m,
// 3s5z_vs_3s6z, 3s_vs_5z, 6h_vs_8z) spawn mirrored team clusters with a
// small per-episode position jitter; smacv2_{5,10,20}_units draw each unit's
// type uniformly per episode and use either reflected uniform spawns or a
// surrounded formation, treating both teams identically.
//
// By default enemies follow a built-in decentralized heuristic (sticky
// target, otherwise lowest-index opponent in range, else nearest visible,
// else sweep toward the opposing side and bounce at the map edge). With
// config enemy_controlled=true the enemy units become agents ("enemy_k")
// and the heuristic is disabled, enabling self-play.
//
// Dead units stay in the agent list (actions ignored, only "stop" legal,
// observations zeroed); agent_active reports false for them so trainers can
// exclude their transitions from losses.
//
// Config keys: max_steps (100), map_size (32), enemy_controlled (false),
// spawn_jitter (0.5), ally_units / enemy_units (string lists overriding the
// scenario roster, fixed-cluster spawns), and unit_stats, a nested object
// {"marine": {"health": .., "damage": .., "cooldown": .., "speed": ..,
//  "sight": .., "range": .., "radius": ..}, ...} overriding the built-in
// table for either team.

#include <memory>
#include <string>
#include <vector>

#include "marl/config.hpp"
#include "marl/env.hpp"

namespace marl::envs {

// pinned per-type combat table (SC2-flavored defaults)
struct SmaxUnitStats {
  double health = 0.0;
  double damage = 0.0;
  double cooldown = 0.0;  // seconds between shots
  double speed = 0.0;     // map units per second
  double sight = 0.0;     // center-to-center visibility radius
  double range = 0.0;     // edge-to-edge attack reach
  double radius = 0.0;    // collision disc radius
};

// unit type names in one-hot order: marine, stalker, zealot, hydralisk,
// zergling, marauder
const std::vector<std::string>& smax_unit_type_names();
const SmaxUnitStats& smax_default_unit_stats(int type);

const std::vector<std::string>& smax_scenario_names();
std::shared_ptr<const Env> make_smax(const std::string& scenario, const Config& config);

// read-only per-unit snapshot for tooling and tests (allies first)
struct SmaxUnitView {
  double x = 0.0;
  double y = 0.0;
  double health = 0.0;
  double cooldown = 0.0;
  int type = 0;
  int team = 0;  // 0 ally, 1 enemy
  int prev_action = 4;
};
std::vector<SmaxUnitView> smax_unit_view(const Env& env, const EnvState& state);

// -1 while the battle is undecided, else 0 ally win, 1 enemy win, 2 draw
int smax_winner(const Env& env, const EnvState& state);

// recomputes the per-agent reward for the transition prev -> next
AgentMap<double> smax_reward(const Env& env, const EnvState& prev, const EnvState& next);

// testing aid: copy of `state` with unit centers replaced (allies first;
// must supply one position per unit). Hypothetical states made this way may
// overlap discs until the next step separates them.
StatePtr smax_with_positions(const Env& env, const EnvState& state,
                             const std::vector<std::pair<double, double>>& positions);

// decentralized scripted controller used for built-in enemies, exposed so a
// copying policy can be evaluated against it. `unit` indexes the view order
// of smax_unit_view. Memory persists across steps; defaults mean "no target
// yet" and "sweep toward the opposing side".
struct SmaxMemory {
  int target = -1;  // opponent index the unit is locked onto
  int sweep = -1;   // action id 0..3 used while nothing is visible
};
int smax_heuristic_action(const Env& env, const EnvState& state, int unit, SmaxMemory& memory);

}  // namespace marl::envs
