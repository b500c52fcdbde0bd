#include "marl/envs/smax.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "marl/config.hpp"
#include "marl/errors.hpp"

namespace marl::envs {
namespace {

constexpr double kDt = 1.0 / 16.0;     // seconds simulated per physics tick
constexpr int kTicksPerStep = 8;       // one env step = half a second
constexpr double kSeparationTol = 1e-6;
constexpr int kMoveNorth = 0, kMoveSouth = 1, kMoveEast = 2, kMoveWest = 3, kStop = 4,
              kAttackBase = 5;

enum UnitType { kMarine = 0, kStalker, kZealot, kHydralisk, kZergling, kMarauder, kTypeCount };

// health / damage / cooldown / speed / sight / range / radius
constexpr SmaxUnitStats kDefaultStats[kTypeCount] = {
    {45.0, 6.0, 0.61, 3.15, 9.0, 5.0, 0.375},     // marine
    {160.0, 13.0, 1.34, 4.13, 9.0, 6.0, 0.625},   // stalker
    {150.0, 16.0, 0.86, 3.15, 9.0, 0.1, 0.5},     // zealot (both swings folded together)
    {80.0, 12.0, 0.59, 3.15, 9.0, 5.0, 0.625},    // hydralisk
    {35.0, 5.0, 0.497, 4.13, 9.0, 0.1, 0.375},    // zergling
    {125.0, 10.0, 1.07, 3.15, 9.0, 6.0, 0.5625},  // marauder
};

const std::vector<std::string> kTypeNames = {"marine",    "stalker",  "zealot",
                                             "hydralisk", "zergling", "marauder"};

const std::vector<std::string> kScenarios = {
    "2s3z",       "3s5z",          "5m_vs_6m",       "10m_vs_11m",
    "27m_vs_30m", "3s5z_vs_3s6z",  "3s_vs_5z",       "6h_vs_8z",
    "smacv2_5_units", "smacv2_10_units", "smacv2_20_units"};

std::vector<int8_t> roster(int marines, int stalkers, int zealots, int hydras, int lings) {
  std::vector<int8_t> out;
  for (int i = 0; i < stalkers; ++i) out.push_back(kStalker);
  for (int i = 0; i < zealots; ++i) out.push_back(kZealot);
  for (int i = 0; i < marines; ++i) out.push_back(kMarine);
  for (int i = 0; i < hydras; ++i) out.push_back(kHydralisk);
  for (int i = 0; i < lings; ++i) out.push_back(kZergling);
  return out;
}

struct SmaxState : EnvState {
  std::vector<double> x, y, health, cooldown;
  std::vector<int8_t> type;
  std::vector<int16_t> prev_action;  // raw action id from the last step
  std::vector<int16_t> ai_target;    // built-in controller memory, one slot per unit
  std::vector<int8_t> ai_sweep;
  int t = 0;
  int8_t winner = -1;  // -1 undecided, 0 ally, 1 enemy, 2 draw
};

class SmaxEnv : public Env {
 public:
  SmaxEnv(std::string scenario, const Config& config) : scenario_(std::move(scenario)) {
    if (scenario_ == "2s3z") {
      ally_types_ = roster(0, 2, 3, 0, 0);
    } else if (scenario_ == "3s5z") {
      ally_types_ = roster(0, 3, 5, 0, 0);
    } else if (scenario_ == "5m_vs_6m") {
      ally_types_ = roster(5, 0, 0, 0, 0);
      enemy_types_ = roster(6, 0, 0, 0, 0);
    } else if (scenario_ == "10m_vs_11m") {
      ally_types_ = roster(10, 0, 0, 0, 0);
      enemy_types_ = roster(11, 0, 0, 0, 0);
    } else if (scenario_ == "27m_vs_30m") {
      ally_types_ = roster(27, 0, 0, 0, 0);
      enemy_types_ = roster(30, 0, 0, 0, 0);
    } else if (scenario_ == "3s5z_vs_3s6z") {
      ally_types_ = roster(0, 3, 5, 0, 0);
      enemy_types_ = roster(0, 3, 6, 0, 0);
    } else if (scenario_ == "3s_vs_5z") {
      ally_types_ = roster(0, 3, 0, 0, 0);
      enemy_types_ = roster(0, 0, 0, 0, 5);
    } else if (scenario_ == "6h_vs_8z") {
      ally_types_ = roster(0, 0, 0, 6, 0);
      enemy_types_ = roster(0, 0, 0, 0, 8);
    } else if (scenario_ == "smacv2_5_units") {
      random_types_ = 5;
    } else if (scenario_ == "smacv2_10_units") {
      random_types_ = 10;
    } else if (scenario_ == "smacv2_20_units") {
      random_types_ = 20;
    } else {
      throw NotFoundError("unknown smax scenario: " + scenario_);
    }
    if (enemy_types_.empty()) enemy_types_ = ally_types_;

    ConfigView v(config, id());
    max_steps_ = v.get_int("max_steps", 100);
    map_ = v.get_double("map_size", 32.0);
    enemy_controlled_ = v.get_bool("enemy_controlled", false);
    jitter_ = v.get_double("spawn_jitter", 0.5);
    auto ally_override = v.get_string_list("ally_units", {});
    auto enemy_override = v.get_string_list("enemy_units", {});
    Config stats_cfg = v.get_object("unit_stats");
    v.check_no_extras();
    if (max_steps_ < 1) throw SchemaError(id() + ": max_steps must be >= 1");
    if (map_ < 4.0) throw SchemaError(id() + ": map_size must be >= 4");
    if (jitter_ < 0.0) throw SchemaError(id() + ": spawn_jitter must be >= 0");

    for (int t = 0; t < kTypeCount; ++t) stats_[t] = kDefaultStats[t];
    ConfigView sv(stats_cfg, id() + ".unit_stats");
    for (int t = 0; t < kTypeCount; ++t) {
      if (!sv.has(kTypeNames[size_t(t)])) continue;
      ConfigView uv(sv.get_object(kTypeNames[size_t(t)]), id() + ".unit_stats." + kTypeNames[size_t(t)]);
      auto& st = stats_[t];
      st.health = uv.get_double("health", st.health);
      st.damage = uv.get_double("damage", st.damage);
      st.cooldown = uv.get_double("cooldown", st.cooldown);
      st.speed = uv.get_double("speed", st.speed);
      st.sight = uv.get_double("sight", st.sight);
      st.range = uv.get_double("range", st.range);
      st.radius = uv.get_double("radius", st.radius);
      uv.check_no_extras();
      if (st.health <= 0 || st.cooldown <= 0 || st.sight <= 0 || st.radius <= 0 ||
          st.damage < 0 || st.speed < 0 || st.range < 0)
        throw SchemaError(id() + ": invalid unit_stats for " + kTypeNames[size_t(t)]);
    }
    sv.check_no_extras();

    if (!ally_override.empty()) ally_types_ = parse_roster(ally_override, "ally_units");
    if (!enemy_override.empty()) enemy_types_ = parse_roster(enemy_override, "enemy_units");
    if (!ally_override.empty() || !enemy_override.empty()) {
      if (random_types_ > 0 && (ally_override.empty() || enemy_override.empty()))
        throw SchemaError(id() + ": random-type scenarios need both ally_units and enemy_units");
      random_types_ = 0;  // explicit rosters always spawn as fixed mirrored clusters
    }
    n_ally_ = random_types_ > 0 ? random_types_ : int(ally_types_.size());
    n_enemy_ = random_types_ > 0 ? random_types_ : int(enemy_types_.size());
    n_ = n_ally_ + n_enemy_;

    for (int i = 0; i < n_ally_; ++i) agents_.push_back("ally_" + std::to_string(i));
    if (enemy_controlled_)
      for (int i = 0; i < n_enemy_; ++i) agents_.push_back("enemy_" + std::to_string(i));
  }

  std::string id() const override { return "SMAX_" + scenario_; }

  SpaceDescriptor observation_space(const std::string&) const override {
    return SpaceDescriptor::box({obs_size()}, -1.0f, 1.0f);
  }
  SpaceDescriptor action_space(const std::string& agent) const override {
    return SpaceDescriptor::discrete(kAttackBase + (team_of(agent_index(agent)) == 0 ? n_enemy_ : n_ally_));
  }

  int max_steps() const override { return max_steps_; }
  bool cooperative() const override { return !enemy_controlled_; }

  int obs_size() const { return 10 + 17 * (n_ - 1); }
  int world_state_size() const override { return 18 * n_ + 1; }

  std::pair<AgentMap<Obs>, StatePtr> reset(const PrngKey& key) const override {
    auto s = std::make_shared<SmaxState>();
    s->type.resize(size_t(n_));
    if (random_types_ > 0) {
      for (int i = 0; i < n_ally_; ++i)
        s->type[size_t(i)] = int8_t(prng::randint1(prng::fold_in(key, 10 + uint64_t(i)), 0, kTypeCount));
      for (int i = 0; i < n_enemy_; ++i)
        s->type[size_t(n_ally_ + i)] =
            int8_t(prng::randint1(prng::fold_in(key, 500 + uint64_t(i)), 0, kTypeCount));
    } else {
      for (int i = 0; i < n_ally_; ++i) s->type[size_t(i)] = ally_types_[size_t(i)];
      for (int i = 0; i < n_enemy_; ++i) s->type[size_t(n_ally_ + i)] = enemy_types_[size_t(i)];
    }

    s->x.assign(size_t(n_), 0.0);
    s->y.assign(size_t(n_), 0.0);
    if (random_types_ > 0)
      spawn_smacv2(*s, key);
    else
      spawn_clusters(*s, key);

    s->health.resize(size_t(n_));
    s->cooldown.assign(size_t(n_), 0.0);
    for (int u = 0; u < n_; ++u) s->health[size_t(u)] = stats_[s->type[size_t(u)]].health;
    s->prev_action.assign(size_t(n_), kStop);
    s->ai_target.assign(size_t(n_), -1);
    s->ai_sweep.assign(size_t(n_), -1);

    separate(*s, true);  // spawn jitter may leave small overlaps
    return {observe_all(*s), s};
  }

  std::vector<uint8_t> legal_actions(const EnvState& state,
                                     const std::string& agent) const override {
    const auto& s = dynamic_cast<const SmaxState&>(state);
    int u = agent_index(agent);
    int opp_start = team_of(u) == 0 ? n_ally_ : 0;
    int opp_n = team_of(u) == 0 ? n_enemy_ : n_ally_;
    std::vector<uint8_t> mask(size_t(kAttackBase + opp_n), 0);
    if (s.winner != -1) return mask;
    mask[kStop] = 1;  // dead units can only wait
    if (s.health[size_t(u)] <= 0.0) return mask;
    for (int m = 0; m < kStop; ++m) mask[size_t(m)] = 1;
    for (int k = 0; k < opp_n; ++k) {
      int o = opp_start + k;
      if (s.health[size_t(o)] > 0.0 && in_attack_range(s, u, o)) mask[size_t(kAttackBase + k)] = 1;
    }
    return mask;
  }

  bool agent_active(const EnvState& state, const std::string& agent) const override {
    const auto& s = dynamic_cast<const SmaxState&>(state);
    return s.health[size_t(agent_index(agent))] > 0.0;
  }

  StepResult step(const PrngKey&, const EnvState& state,
                  const AgentMap<Action>& actions) const override {
    const auto& prev = dynamic_cast<const SmaxState&>(state);
    if (prev.winner != -1) throw ContractError(id() + ": cannot step a terminal state");
    validate_actions(actions);

    auto s = std::make_shared<SmaxState>(prev);
    std::vector<int> act(size_t(n_), kStop);
    for (int i = 0; i < n_ally_; ++i) act[size_t(i)] = std::get<int>(actions.at(agents_[size_t(i)]));
    if (enemy_controlled_) {
      for (int i = 0; i < n_enemy_; ++i)
        act[size_t(n_ally_ + i)] = std::get<int>(actions.at(agents_[size_t(n_ally_ + i)]));
    } else {
      // decentralized built-in opponent; decisions are made on the pre-step
      // state and each unit's memory carries over through the state
      for (int i = 0; i < n_enemy_; ++i) {
        int u = n_ally_ + i;
        SmaxMemory mem{prev.ai_target[size_t(u)], prev.ai_sweep[size_t(u)]};
        act[size_t(u)] = heuristic_action(prev, u, mem);
        s->ai_target[size_t(u)] = int16_t(mem.target);
        s->ai_sweep[size_t(u)] = int8_t(mem.sweep);
      }
    }

    for (int tick = 0; tick < kTicksPerStep; ++tick) simulate_tick(*s, act, tick == kTicksPerStep - 1);
    for (int u = 0; u < n_; ++u) s->prev_action[size_t(u)] = int16_t(act[size_t(u)]);
    s->t = prev.t + 1;

    int ally_alive = alive_count(*s, 0), enemy_alive = alive_count(*s, 1);
    if (ally_alive == 0 && enemy_alive == 0)
      s->winner = 2;
    else if (enemy_alive == 0)
      s->winner = 0;
    else if (ally_alive == 0)
      s->winner = 1;
    else if (s->t >= max_steps_)
      s->winner = 2;  // timeout counts as a draw: no win bonus for either side

    StepResult r;
    r.obs = observe_all(*s);
    r.state = s;
    r.rewards = reward_map(prev, *s);
    bool done = s->winner != -1;
    for (const auto& agent : agents_) {
      int team = team_of(agent_index(agent));
      r.dones.emplace(agent, done);
      r.infos.emplace(agent, Info{{"alive", s->health[size_t(agent_index(agent))] > 0.0 ? 1.0 : 0.0},
                                  {"battle_won", s->winner == team ? 1.0 : 0.0},
                                  {"draw", s->winner == 2 ? 1.0 : 0.0}});
    }
    r.dones.emplace(kAllAgents, done);
    return r;
  }

  std::optional<std::vector<float>> world_state(const EnvState& state) const override {
    const auto& s = dynamic_cast<const SmaxState&>(state);
    std::vector<float> w;
    w.reserve(size_t(world_state_size()));
    for (int u = 0; u < n_; ++u) {
      const auto& st = stats_[s.type[size_t(u)]];
      w.push_back(s.health[size_t(u)] > 0.0 ? 1.0f : 0.0f);
      w.push_back(float(s.x[size_t(u)] / map_));
      w.push_back(float(s.y[size_t(u)] / map_));
      w.push_back(float(s.health[size_t(u)] / st.health));
      w.push_back(float(s.cooldown[size_t(u)] / st.cooldown));
      w.push_back(float(team_of(u)));
      push_one_hot(w, s.type[size_t(u)], kTypeCount);
      push_one_hot(w, action_bucket(s.prev_action[size_t(u)]), 6);
    }
    w.push_back(float(double(s.t) / max_steps_));
    return w;
  }

  std::string render(const EnvState& state) const override {
    const auto& s = dynamic_cast<const SmaxState&>(state);
    int grid = int(map_);
    std::string out = id() + " t=" + std::to_string(s.t) + " ally " +
                      std::to_string(alive_count(s, 0)) + "/" + std::to_string(n_ally_) +
                      " enemy " + std::to_string(alive_count(s, 1)) + "/" +
                      std::to_string(n_enemy_) +
                      (s.winner == -1 ? "" : " winner=" + std::to_string(int(s.winner))) + "\n";
    std::vector<std::string> rows(size_t(grid), std::string(size_t(grid), '.'));
    const char* letters = "MSZHLD";
    for (int u = 0; u < n_; ++u) {
      if (s.health[size_t(u)] <= 0.0) continue;
      int cx = std::clamp(int(s.x[size_t(u)]), 0, grid - 1);
      int cy = std::clamp(int(s.y[size_t(u)]), 0, grid - 1);
      char c = letters[s.type[size_t(u)]];
      rows[size_t(grid - 1 - cy)][size_t(cx)] = team_of(u) == 0 ? c : char(std::tolower(c));
    }
    for (const auto& row : rows) out += row + "\n";
    return out;
  }

  uint64_t state_hash(const EnvState& state) const override {
    const auto& s = dynamic_cast<const SmaxState&>(state);
    uint64_t h = 1469598103934665603ull;
    auto mix = [&h](uint64_t v) {
      h ^= v;
      h *= 1099511628211ull;
    };
    auto mixd = [&mix](double d) {
      uint64_t bits;
      std::memcpy(&bits, &d, sizeof bits);
      mix(bits);
    };
    for (int u = 0; u < n_; ++u) {
      mixd(s.x[size_t(u)]);
      mixd(s.y[size_t(u)]);
      mixd(s.health[size_t(u)]);
      mixd(s.cooldown[size_t(u)]);
      mix(uint64_t(uint8_t(s.type[size_t(u)])));
      mix(uint64_t(uint16_t(s.prev_action[size_t(u)])));
      mix(uint64_t(uint16_t(s.ai_target[size_t(u)])));
      mix(uint64_t(uint8_t(s.ai_sweep[size_t(u)])));
    }
    mix(uint64_t(s.t));
    mix(uint64_t(uint8_t(s.winner)));
    return h;
  }

  // --- helpers shared with the free functions ---

  int n_units() const { return n_; }
  int n_allies() const { return n_ally_; }
  const SmaxUnitStats& type_stats(int type) const { return stats_[type]; }
  int team_of(int unit) const { return unit < n_ally_ ? 0 : 1; }

  int agent_index(const std::string& agent) const {
    for (size_t i = 0; i < agents_.size(); ++i)
      if (agents_[i] == agent) return int(i);
    throw NotFoundError(id() + ": unknown agent " + agent);
  }

  AgentMap<double> reward_map(const SmaxState& prev, const SmaxState& next) const {
    // each side is paid for depleting the opposing pool of health + lives,
    // scaled so a full wipe is worth 0.5, plus a 0.5 bonus on the winning step
    double ally_r = 0.5 * (pool(prev, 1) - pool(next, 1)) / (2.0 * n_enemy_);
    double enemy_r = 0.5 * (pool(prev, 0) - pool(next, 0)) / (2.0 * n_ally_);
    if (prev.winner == -1 && next.winner == 0) ally_r += 0.5;
    if (prev.winner == -1 && next.winner == 1) enemy_r += 0.5;
    AgentMap<double> out;
    for (const auto& agent : agents_)
      out.emplace(agent, team_of(agent_index(agent)) == 0 ? ally_r : enemy_r);
    return out;
  }

  double pool(const SmaxState& s, int team) const {
    double total = 0.0;
    for (int u = team == 0 ? 0 : n_ally_, end = team == 0 ? n_ally_ : n_; u < end; ++u) {
      total += s.health[size_t(u)] / stats_[s.type[size_t(u)]].health;
      total += s.health[size_t(u)] > 0.0 ? 1.0 : 0.0;
    }
    return total;
  }

  int heuristic_action(const SmaxState& s, int u, SmaxMemory& mem) const {
    if (s.health[size_t(u)] <= 0.0) return kStop;
    int team = team_of(u);
    int opp_start = team == 0 ? n_ally_ : 0;
    int opp_n = team == 0 ? n_enemy_ : n_ally_;
    double sight = stats_[s.type[size_t(u)]].sight;

    auto visible = [&](int k) {
      int o = opp_start + k;
      return s.health[size_t(o)] > 0.0 && center_dist(s, u, o) <= sight;
    };
    // keep a locked target while it stays alive and visible
    if (mem.target < 0 || mem.target >= opp_n || !visible(mem.target)) {
      mem.target = -1;
      double best_dist = 0.0;
      for (int k = 0; k < opp_n; ++k) {  // lowest-index opponent already in reach
        if (visible(k) && in_attack_range(s, u, opp_start + k)) {
          mem.target = k;
          break;
        }
      }
      if (mem.target < 0) {
        for (int k = 0; k < opp_n; ++k) {  // otherwise the nearest visible one
          if (!visible(k)) continue;
          double d = center_dist(s, u, opp_start + k);
          if (mem.target < 0 || d < best_dist) {
            mem.target = k;
            best_dist = d;
          }
        }
      }
    }
    if (mem.target >= 0) {
      int o = opp_start + mem.target;
      if (in_attack_range(s, u, o)) return kAttackBase + mem.target;
      double dx = s.x[size_t(o)] - s.x[size_t(u)];
      double dy = s.y[size_t(o)] - s.y[size_t(u)];
      if (std::abs(dx) >= std::abs(dy)) return dx > 0 ? kMoveEast : kMoveWest;
      return dy > 0 ? kMoveNorth : kMoveSouth;
    }
    // nothing visible: sweep the map toward the opposing side, bounce at edges
    if (mem.sweep < 0) mem.sweep = team == 0 ? kMoveEast : kMoveWest;
    if (s.x[size_t(u)] <= 1.0) mem.sweep = kMoveEast;
    if (s.x[size_t(u)] >= map_ - 1.0) mem.sweep = kMoveWest;
    return mem.sweep;
  }

  StatePtr with_positions(const SmaxState& base,
                          const std::vector<std::pair<double, double>>& pos) const {
    if (int(pos.size()) != n_)
      throw ContractError(id() + ": expected " + std::to_string(n_) + " positions");
    auto s = std::make_shared<SmaxState>(base);
    for (int u = 0; u < n_; ++u) {
      double r = stats_[s->type[size_t(u)]].radius;
      s->x[size_t(u)] = std::clamp(pos[size_t(u)].first, r, map_ - r);
      s->y[size_t(u)] = std::clamp(pos[size_t(u)].second, r, map_ - r);
    }
    return s;
  }

 private:
  std::vector<int8_t> parse_roster(const std::vector<std::string>& names, const char* key) const {
    std::vector<int8_t> out;
    for (const auto& name : names) {
      auto it = std::find(kTypeNames.begin(), kTypeNames.end(), name);
      if (it == kTypeNames.end())
        throw SchemaError(id() + ": " + key + " has unknown unit type '" + name + "'");
      out.push_back(int8_t(it - kTypeNames.begin()));
    }
    return out;
  }

  // mirrored team columns: five units per rank, deeper ranks further from the
  // opponent, plus a small keyed jitter so episodes are not all identical
  void spawn_clusters(SmaxState& s, const PrngKey& key) const {
    for (int i = 0; i < n_ally_; ++i)
      place_jittered(s, i, 0.25 * map_ - 1.5 * (i / 5), 0.5 * map_ + 1.5 * (i % 5 - 2), key);
    for (int i = 0; i < n_enemy_; ++i)
      place_jittered(s, n_ally_ + i, 0.75 * map_ + 1.5 * (i / 5), 0.5 * map_ + 1.5 * (i % 5 - 2),
                     key);
  }

  void spawn_smacv2(SmaxState& s, const PrngKey& key) const {
    if (prng::bernoulli(prng::fold_in(key, 1), 0.5)) {
      // reflected uniform spawns: enemy positions mirror the ally draws
      for (int i = 0; i < n_ally_; ++i) {
        double ax = prng::uniform1(prng::fold_in(key, 1000 + 2 * uint64_t(i)), 0.1 * map_, 0.4 * map_);
        double ay = prng::uniform1(prng::fold_in(key, 1001 + 2 * uint64_t(i)), 0.1 * map_, 0.9 * map_);
        place(s, i, ax, ay);
        place(s, n_ally_ + i, map_ - ax, ay);
      }
    } else {
      // one team holds the center, the other surrounds it on a ring; a coin
      // flip decides which is which so both teams see the same distribution
      bool allies_center = prng::bernoulli(prng::fold_in(key, 2), 0.5);
      int c0 = allies_center ? 0 : n_ally_, cn = allies_center ? n_ally_ : n_enemy_;
      int r0 = allies_center ? n_ally_ : 0, rn = allies_center ? n_enemy_ : n_ally_;
      for (int i = 0; i < cn; ++i)
        place_jittered(s, c0 + i, 0.5 * map_ + 1.5 * (i / 5), 0.5 * map_ + 1.5 * (i % 5 - 2), key);
      for (int i = 0; i < rn; ++i) {
        double theta = prng::uniform1(prng::fold_in(key, 2000 + 2 * uint64_t(i)), 0.0, 6.283185307179586);
        double rho = prng::uniform1(prng::fold_in(key, 2001 + 2 * uint64_t(i)), 0.25 * map_, 0.45 * map_);
        place(s, r0 + i, 0.5 * map_ + rho * std::cos(theta), 0.5 * map_ + rho * std::sin(theta));
      }
    }
  }

  void place(SmaxState& s, int u, double bx, double by) const {
    double r = stats_[s.type[size_t(u)]].radius;
    s.x[size_t(u)] = std::clamp(bx, r, map_ - r);
    s.y[size_t(u)] = std::clamp(by, r, map_ - r);
  }
  void place_jittered(SmaxState& s, int u, double bx, double by, const PrngKey& key) const {
    if (jitter_ > 0.0) {
      bx += prng::uniform1(prng::fold_in(key, 3000 + 2 * uint64_t(u)), -jitter_, jitter_);
      by += prng::uniform1(prng::fold_in(key, 3001 + 2 * uint64_t(u)), -jitter_, jitter_);
    }
    place(s, u, bx, by);
  }

  double center_dist(const SmaxState& s, int a, int b) const {
    return std::hypot(s.x[size_t(a)] - s.x[size_t(b)], s.y[size_t(a)] - s.y[size_t(b)]);
  }
  bool in_attack_range(const SmaxState& s, int shooter, int target) const {
    const auto& st = stats_[s.type[size_t(shooter)]];
    double reach = st.range + st.radius + stats_[s.type[size_t(target)]].radius;
    return center_dist(s, shooter, target) <= reach;
  }

  void simulate_tick(SmaxState& s, const std::vector<int>& act, bool final_tick) const {
    // weapons recharge first so a fresh unit can fire on its very first tick
    for (int u = 0; u < n_; ++u)
      if (s.health[size_t(u)] > 0.0)
        s.cooldown[size_t(u)] = std::max(0.0, s.cooldown[size_t(u)] - kDt);

    static constexpr double kDirX[4] = {0.0, 0.0, 1.0, -1.0};
    static constexpr double kDirY[4] = {1.0, -1.0, 0.0, 0.0};
    for (int u = 0; u < n_; ++u) {
      if (s.health[size_t(u)] <= 0.0 || act[size_t(u)] > kMoveWest) continue;
      const auto& st = stats_[s.type[size_t(u)]];
      s.x[size_t(u)] = std::clamp(s.x[size_t(u)] + st.speed * kDt * kDirX[act[size_t(u)]],
                                  st.radius, map_ - st.radius);
      s.y[size_t(u)] = std::clamp(s.y[size_t(u)] + st.speed * kDt * kDirY[act[size_t(u)]],
                                  st.radius, map_ - st.radius);
    }

    // simultaneous fire against the tick-start health snapshot: mutual lethal
    // hits land, so the last two units can trade and produce a draw
    std::vector<double> damage(size_t(n_), 0.0);
    const std::vector<double> health0 = s.health;
    for (int u = 0; u < n_; ++u) {
      if (health0[size_t(u)] <= 0.0 || act[size_t(u)] < kAttackBase) continue;
      int o = (team_of(u) == 0 ? n_ally_ : 0) + (act[size_t(u)] - kAttackBase);
      if (health0[size_t(o)] <= 0.0 || !in_attack_range(s, u, o)) continue;
      if (s.cooldown[size_t(u)] > 0.0) continue;
      damage[size_t(o)] += stats_[s.type[size_t(u)]].damage;
      s.cooldown[size_t(u)] = stats_[s.type[size_t(u)]].cooldown;
    }
    for (int u = 0; u < n_; ++u)
      if (damage[size_t(u)] > 0.0)
        s.health[size_t(u)] = std::max(0.0, health0[size_t(u)] - damage[size_t(u)]);

    separate(s, final_tick);
  }

  // push overlapping living discs apart along their center line, half the
  // overlap each; on the final tick iterate to a fixpoint so every step ends
  // with at most kSeparationTol of residual overlap
  void separate(SmaxState& s, bool to_fixpoint) const {
    for (int pass = 0; pass < (to_fixpoint ? 256 : 1); ++pass) {
      for (int a = 0; a < n_; ++a) {
        if (s.health[size_t(a)] <= 0.0) continue;
        for (int b = a + 1; b < n_; ++b) {
          if (s.health[size_t(b)] <= 0.0) continue;
          double ra = stats_[s.type[size_t(a)]].radius, rb = stats_[s.type[size_t(b)]].radius;
          double dx = s.x[size_t(b)] - s.x[size_t(a)], dy = s.y[size_t(b)] - s.y[size_t(a)];
          double d = std::hypot(dx, dy);
          double overlap = ra + rb - d;
          if (overlap <= 0.0) continue;
          double nx = 1.0, ny = 0.0;  // coincident centers get a fixed nudge axis
          if (d > 1e-12) {
            nx = dx / d;
            ny = dy / d;
          }
          double push = 0.5 * overlap;
          s.x[size_t(a)] = std::clamp(s.x[size_t(a)] - nx * push, ra, map_ - ra);
          s.y[size_t(a)] = std::clamp(s.y[size_t(a)] - ny * push, ra, map_ - ra);
          s.x[size_t(b)] = std::clamp(s.x[size_t(b)] + nx * push, rb, map_ - rb);
          s.y[size_t(b)] = std::clamp(s.y[size_t(b)] + ny * push, rb, map_ - rb);
        }
      }
      if (!to_fixpoint || max_overlap(s) <= kSeparationTol) break;
    }
  }

  double max_overlap(const SmaxState& s) const {
    double worst = 0.0;
    for (int a = 0; a < n_; ++a) {
      if (s.health[size_t(a)] <= 0.0) continue;
      for (int b = a + 1; b < n_; ++b) {
        if (s.health[size_t(b)] <= 0.0) continue;
        double sum = stats_[s.type[size_t(a)]].radius + stats_[s.type[size_t(b)]].radius;
        worst = std::max(worst, sum - center_dist(s, a, b));
      }
    }
    return worst;
  }

  int alive_count(const SmaxState& s, int team) const {
    int c = 0;
    for (int u = team == 0 ? 0 : n_ally_, end = team == 0 ? n_ally_ : n_; u < end; ++u)
      c += s.health[size_t(u)] > 0.0 ? 1 : 0;
    return c;
  }

  static int action_bucket(int action) { return action <= kStop ? action : kStop + 1; }

  static void push_one_hot(std::vector<float>& v, int idx, int n) {
    for (int i = 0; i < n; ++i) v.push_back(i == idx ? 1.0f : 0.0f);
  }

  AgentMap<Obs> observe_all(const SmaxState& s) const {
    AgentMap<Obs> out;
    for (const auto& agent : agents_) out.emplace(agent, observe(s, agent_index(agent)));
    return out;
  }

  Obs observe(const SmaxState& s, int me) const {
    Obs o(size_t(obs_size()), 0.0f);
    if (s.health[size_t(me)] <= 0.0) return o;  // the dead see nothing
    const auto& my = stats_[s.type[size_t(me)]];
    size_t k = 0;
    o[k++] = float(s.health[size_t(me)] / my.health);
    o[k++] = float(s.cooldown[size_t(me)] / my.cooldown);
    o[k++] = float(s.x[size_t(me)] / map_);
    o[k++] = float(s.y[size_t(me)] / map_);
    for (int i = 0; i < kTypeCount; ++i) o[k++] = i == s.type[size_t(me)] ? 1.0f : 0.0f;

    auto write_unit = [&](int u) {
      bool vis = s.health[size_t(u)] > 0.0 && center_dist(s, me, u) <= my.sight;
      if (!vis) {
        k += 17;
        return;
      }
      const auto& st = stats_[s.type[size_t(u)]];
      o[k++] = 1.0f;
      o[k++] = float((s.x[size_t(u)] - s.x[size_t(me)]) / my.sight);
      o[k++] = float((s.y[size_t(u)] - s.y[size_t(me)]) / my.sight);
      o[k++] = float(s.health[size_t(u)] / st.health);
      o[k++] = float(s.cooldown[size_t(u)] / st.cooldown);
      for (int i = 0; i < kTypeCount; ++i) o[k++] = i == s.type[size_t(u)] ? 1.0f : 0.0f;
      int bucket = action_bucket(s.prev_action[size_t(u)]);
      for (int i = 0; i < 6; ++i) o[k++] = i == bucket ? 1.0f : 0.0f;
    };
    int team = team_of(me);
    for (int u = 0; u < n_; ++u)  // teammates first...
      if (u != me && team_of(u) == team) write_unit(u);
    for (int u = 0; u < n_; ++u)  // ...then opponents, both in index order
      if (team_of(u) != team) write_unit(u);
    return o;
  }

  std::string scenario_;
  std::vector<int8_t> ally_types_, enemy_types_;
  int random_types_ = 0;  // > 0: unit types are drawn uniformly per episode
  int n_ally_ = 0, n_enemy_ = 0, n_ = 0;
  SmaxUnitStats stats_[kTypeCount];
  double map_ = 32.0, jitter_ = 0.5;
  int max_steps_ = 100;
  bool enemy_controlled_ = false;
};

const SmaxEnv& as_smax(const Env& env) {
  const auto* e = dynamic_cast<const SmaxEnv*>(&env);
  if (!e) throw ContractError("expected a SMAX environment, got " + env.id());
  return *e;
}

}  // namespace

const std::vector<std::string>& smax_unit_type_names() { return kTypeNames; }

const SmaxUnitStats& smax_default_unit_stats(int type) {
  if (type < 0 || type >= kTypeCount) throw ContractError("unit type out of range");
  return kDefaultStats[type];
}

const std::vector<std::string>& smax_scenario_names() { return kScenarios; }

std::shared_ptr<const Env> make_smax(const std::string& scenario, const Config& config) {
  return std::make_shared<SmaxEnv>(scenario, config);
}

std::vector<SmaxUnitView> smax_unit_view(const Env& env, const EnvState& state) {
  const auto& e = as_smax(env);
  const auto& s = dynamic_cast<const SmaxState&>(state);
  std::vector<SmaxUnitView> out;
  for (int u = 0; u < e.n_units(); ++u) {
    SmaxUnitView v;
    v.x = s.x[size_t(u)];
    v.y = s.y[size_t(u)];
    v.health = s.health[size_t(u)];
    v.cooldown = s.cooldown[size_t(u)];
    v.type = s.type[size_t(u)];
    v.team = e.team_of(u);
    v.prev_action = s.prev_action[size_t(u)];
    out.push_back(v);
  }
  return out;
}

int smax_winner(const Env& env, const EnvState& state) {
  as_smax(env);
  return dynamic_cast<const SmaxState&>(state).winner;
}

AgentMap<double> smax_reward(const Env& env, const EnvState& prev, const EnvState& next) {
  const auto& e = as_smax(env);
  return e.reward_map(dynamic_cast<const SmaxState&>(prev), dynamic_cast<const SmaxState&>(next));
}

StatePtr smax_with_positions(const Env& env, const EnvState& state,
                             const std::vector<std::pair<double, double>>& positions) {
  return as_smax(env).with_positions(dynamic_cast<const SmaxState&>(state), positions);
}

int smax_heuristic_action(const Env& env, const EnvState& state, int unit, SmaxMemory& memory) {
  const auto& e = as_smax(env);
  if (unit < 0 || unit >= e.n_units()) throw ContractError("unit index out of range");
  return e.heuristic_action(dynamic_cast<const SmaxState&>(state), unit, memory);
}

}  // namespace marl::envs
