#include "marl/registry.hpp"

#include <algorithm>
#include <map>
#include <mutex>

#include "marl/envs/bandit.hpp"
#include "marl/envs/coin_game.hpp"
#include "marl/envs/hanabi.hpp"
#include "marl/envs/mpe.hpp"
#include "marl/envs/overcooked.hpp"
#include "marl/envs/smax.hpp"
#include "marl/envs/storm.hpp"
#include "marl/envs/switch_riddle.hpp"
#include "marl/errors.hpp"

namespace marl {

namespace {

struct Registry {
  std::map<std::string, EnvFactory> factories;
  std::vector<std::string> reserved;
  std::mutex mu;
};

Registry& registry() {
  static Registry r;
  return r;
}

void do_register(Registry& r, const std::string& id, EnvFactory factory) {
  if (r.factories.count(id)) throw ContractError("env id already registered: " + id);
  if (std::find(r.reserved.begin(), r.reserved.end(), id) != r.reserved.end())
    throw ContractError("env id is reserved: " + id);
  r.factories[id] = std::move(factory);
}

void register_builtins(Registry& r) {
  // Ids claimed for the remaining reference MPE scenarios.
  r.reserved = {
      "MPE_simple_v3",           "MPE_simple_adversary_v3", "MPE_simple_crypto_v3",
      "MPE_simple_push_v3",      "MPE_simple_reference_v3", "MPE_simple_world_comm_v3",
  };

  do_register(r, "switch_riddle_v0", [](const Config& c) { return envs::make_switch_riddle(c); });
  do_register(r, "bandit_v0", [](const Config& c) { return envs::make_bandit(c); });

  do_register(r, "MPE_simple_spread_v3", [](const Config& c) { return envs::make_mpe("simple_spread", c); });
  do_register(r, "MPE_simple_speaker_listener_v4", [](const Config& c) { return envs::make_mpe("simple_speaker_listener", c); });
  do_register(r, "MPE_simple_tag_v3", [](const Config& c) { return envs::make_mpe("simple_tag", c); });

  for (const auto& name : envs::smax_scenario_names()) {
    do_register(r, "SMAX_" + name, [name](const Config& c) { return envs::make_smax(name, c); });
  }

  do_register(r, "STORM_ipd_v0", [](const Config& c) { return envs::make_storm("ipd", c); });
  do_register(r, "STORM_matching_pennies_v0", [](const Config& c) { return envs::make_storm("matching_pennies", c); });
  do_register(r, "coin_game_v0", [](const Config& c) { return envs::make_coin_game(c); });

  for (const auto& name : envs::overcooked_layout_names()) {
    do_register(r, "overcooked_" + name + "_v0", [name](const Config& c) { return envs::make_overcooked(name, c); });
  }

  do_register(r, "hanabi_v0", [](const Config& c) { return envs::make_hanabi(c); });
}

Registry& initialized_registry() {
  Registry& r = registry();
  std::lock_guard<std::mutex> lock(r.mu);
  if (r.factories.empty()) register_builtins(r);
  return r;
}

}  // namespace

void register_env(const std::string& id, EnvFactory factory) {
  Registry& r = initialized_registry();
  std::lock_guard<std::mutex> lock(r.mu);
  do_register(r, id, std::move(factory));
}

std::shared_ptr<const Env> make_env(const std::string& id, const Config& config) {
  Registry& r = initialized_registry();
  EnvFactory factory;
  {
    std::lock_guard<std::mutex> lock(r.mu);
    auto it = r.factories.find(id);
    if (it == r.factories.end()) {
      if (std::find(r.reserved.begin(), r.reserved.end(), id) != r.reserved.end())
        throw NotFoundError("env id '" + id + "' is reserved but has no implementation yet");
      throw NotFoundError("unknown env id '" + id + "' (see registered_envs())");
    }
    factory = it->second;
  }
  return factory(config);
}

std::vector<std::string> registered_envs() {
  Registry& r = initialized_registry();
  std::lock_guard<std::mutex> lock(r.mu);
  std::vector<std::string> out;
  out.reserve(r.factories.size());
  for (const auto& [id, _] : r.factories) out.push_back(id);
  return out;
}

std::vector<std::string> reserved_envs() {
  Registry& r = initialized_registry();
  std::lock_guard<std::mutex> lock(r.mu);
  return r.reserved;
}

bool is_registered(const std::string& id) {
  Registry& r = initialized_registry();
  std::lock_guard<std::mutex> lock(r.mu);
  return r.factories.count(id) > 0;
}

}  // namespace marl
