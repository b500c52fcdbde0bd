#include <doctest.h>

#include <algorithm>
#include <set>

#include "marl/envs/bandit.hpp"
#include "marl/envs/switch_riddle.hpp"
#include "marl/errors.hpp"
#include "marl/registry.hpp"

using namespace marl;

namespace {

AgentMap<Action> constant_actions(const Env& env, int a) {
  AgentMap<Action> m;
  for (const auto& agent : env.agents()) m.emplace(agent, a);
  return m;
}

}  // namespace

TEST_CASE("registry basics") {
  auto ids = registered_envs();
  CHECK(std::find(ids.begin(), ids.end(), "switch_riddle_v0") != ids.end());
  CHECK(std::find(ids.begin(), ids.end(), "bandit_v0") != ids.end());
  CHECK(std::is_sorted(ids.begin(), ids.end()));

  CHECK_THROWS_AS(make_env("no_such_env"), NotFoundError);
  CHECK_THROWS_WITH_AS(make_env("MPE_simple_adversary_v3"),
                       doctest::Contains("reserved"), NotFoundError);

  auto env = make_env("switch_riddle_v0", Config{{"n_agents", 3}});
  CHECK(env->num_agents() == 3);
  CHECK(env->agents() == std::vector<std::string>{"agent_0", "agent_1", "agent_2"});

  CHECK_THROWS_AS(make_env("switch_riddle_v0", Config{{"n_agentz", 3}}), SchemaError);
  CHECK_THROWS_AS(make_env("switch_riddle_v0", Config{{"n_agents", "three"}}), SchemaError);
}

TEST_CASE("registering duplicates or reserved ids fails") {
  CHECK_THROWS_AS(register_env("switch_riddle_v0", nullptr), ContractError);
  CHECK_THROWS_AS(register_env("MPE_simple_crypto_v3", nullptr), ContractError);
}

TEST_CASE("switch riddle initial state") {
  auto env = make_env("switch_riddle_v0");
  CHECK(env->max_steps() == 4 * 3 - 6);

  auto key = prng::key_from_seed(1);
  auto [obs, state] = env->reset(key);
  auto [obs2, state2] = env->reset(key);
  CHECK(obs == obs2);

  CHECK(obs.keys() == env->agents());
  // Exactly one agent in the room, bulb off, day 1.
  int in_room = 0;
  for (const auto& o : obs.values()) {
    CHECK(o.size() == 3);
    in_room += int(o[0]);
    CHECK(o[1] == 0.0f);  // bulb off everywhere
    CHECK(o[2] == doctest::Approx(1.0f / float(env->max_steps())));
  }
  CHECK(in_room == 1);
}

TEST_CASE("switch riddle tell semantics") {
  auto env = make_env("switch_riddle_v0", Config{{"n_agents", 3}});
  auto key = prng::key_from_seed(4);
  auto [obs, state] = env->reset(key);

  SUBCASE("tell before everyone visited pays -1") {
    auto r = env->step(prng::key_from_seed(5), *state, constant_actions(*env, 2));
    for (double rew : r.rewards.values()) CHECK(rew == -1.0);
    CHECK(r.dones.at("__all__"));
    CHECK_THROWS_AS(env->step(prng::key_from_seed(6), *r.state, constant_actions(*env, 0)),
                    ContractError);
  }

  SUBCASE("tell after everyone visited pays +1") {
    // Walk episodes until one happens to cycle through all three prisoners;
    // the in-room flag in the observation tells us who is visiting.
    bool found = false;
    for (uint64_t seed = 0; seed < 50 && !found; ++seed) {
      auto [o, s] = env->reset(prng::key_from_seed(seed));
      auto day_keys = prng::split(prng::key_from_seed(seed ^ 0xabcdef), 8);
      std::set<size_t> visited;
      StatePtr cur = s;
      AgentMap<Obs> cur_obs = o;
      for (int day = 0; day < env->max_steps(); ++day) {
        for (size_t i = 0; i < cur_obs.size(); ++i)
          if (cur_obs.value(i)[0] == 1.0f) visited.insert(i);
        if (visited.size() == 3) {
          auto r = env->step(day_keys[size_t(day)], *cur, constant_actions(*env, 2));
          for (double rew : r.rewards.values()) CHECK(rew == 1.0);
          CHECK(r.dones.at("__all__"));
          found = true;
          break;
        }
        auto r = env->step(day_keys[size_t(day)], *cur, constant_actions(*env, 0));
        cur = r.state;
        cur_obs = r.obs;
        if (r.dones.at("__all__")) break;
      }
    }
    CHECK(found);
  }
}

TEST_CASE("switch riddle timeout pays zero") {
  auto env = make_env("switch_riddle_v0", Config{{"n_agents", 3}, {"max_steps", 4}});
  auto [obs, state] = env->reset(prng::key_from_seed(9));
  StatePtr cur = state;
  int steps = 0;
  while (true) {
    auto r = env->step(prng::key_from_seed(uint64_t(100 + steps)), *cur, constant_actions(*env, 1));
    ++steps;
    cur = r.state;
    if (r.dones.at("__all__")) {
      for (double rew : r.rewards.values()) CHECK(rew == 0.0);
      break;
    }
  }
  CHECK(steps == 4);
}

TEST_CASE("step validates actions") {
  auto env = make_env("switch_riddle_v0");
  auto [obs, state] = env->reset(prng::key_from_seed(2));

  AgentMap<Action> missing;
  missing.emplace("agent_0", 0);
  CHECK_THROWS_AS(env->step(prng::key_from_seed(3), *state, missing), ContractError);

  auto bad = constant_actions(*env, 0);
  bad.at("agent_1") = 17;
  CHECK_THROWS_AS(env->step(prng::key_from_seed(3), *state, bad), ContractError);
}

TEST_CASE("step is pure") {
  auto env = make_env("switch_riddle_v0");
  auto [obs, state] = env->reset(prng::key_from_seed(31));
  auto acts = constant_actions(*env, 1);
  auto k = prng::key_from_seed(32);
  auto r1 = env->step(k, *state, acts);
  auto r2 = env->step(k, *state, acts);
  CHECK(r1.obs == r2.obs);
  CHECK(r1.rewards == r2.rewards);
  CHECK(r1.dones == r2.dones);
  CHECK(env->state_hash(*r1.state) == env->state_hash(*r2.state));
}

TEST_CASE("bandit pays the chosen arm deterministically") {
  auto env = make_env("bandit_v0", Config{{"arm_rewards", {0.25, -1.0, 2.0}}});
  CHECK(env->num_agents() == 1);
  CHECK(env->action_space("agent_0").n == 3);

  auto [obs, state] = env->reset(prng::key_from_seed(0));
  AgentMap<Action> act;
  act.emplace("agent_0", 2);
  auto r = env->step(prng::key_from_seed(1), *state, act);
  CHECK(r.rewards.at("agent_0") == 2.0);
  CHECK(r.dones.at("__all__"));
}

TEST_CASE("space descriptors validate") {
  CHECK_THROWS_AS(SpaceDescriptor::discrete(0), ContractError);
  CHECK_THROWS_AS(SpaceDescriptor::box({2}, 1.0f, 0.0f), ContractError);

  auto d = SpaceDescriptor::discrete(4);
  CHECK(d.contains(Action{3}));
  CHECK(!d.contains(Action{4}));
  CHECK(!d.contains(Action{std::vector<float>{0.f}}));

  auto b = SpaceDescriptor::box({2, 2}, -1.0f, 1.0f);
  CHECK(b.flat_size() == 4);
  CHECK(b.contains(Action{std::vector<float>{0.f, 0.5f, -1.f, 1.f}}));
  CHECK(!b.contains(Action{std::vector<float>{0.f, 2.f, 0.f, 0.f}}));
  CHECK(!b.contains(Action{std::vector<float>{0.f}}));

  auto s = b.sample(prng::key_from_seed(1));
  CHECK(b.contains(s));
}
