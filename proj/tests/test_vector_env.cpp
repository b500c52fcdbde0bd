#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "marl/errors.hpp"
#include "marl/parallel.hpp"
#include "marl/registry.hpp"
#include "marl/vector_env.hpp"

using namespace marl;

namespace {

std::vector<AgentMap<Action>> constant_batch(const Env& env, int n_envs, int a) {
  std::vector<AgentMap<Action>> out{size_t(n_envs)};
  for (auto& m : out)
    for (const auto& agent : env.agents()) m.emplace(agent, a);
  return out;
}

}  // namespace

TEST_CASE("reset batch matches plain reset for n=1") {
  auto env = make_env("switch_riddle_v0");
  VectorEnv venv(env, 1);
  auto key = prng::key_from_seed(5);

  auto [bobs, bstate] = venv.reset(key);
  auto [obs, state] = env->reset(prng::split(key, 1)[0]);
  CHECK(bobs[0] == obs);
  CHECK(env->state_hash(*bstate.states[0]) == env->state_hash(*state));
}

TEST_CASE("reset batch is pure and instances differ") {
  auto env = make_env("switch_riddle_v0", Config{{"n_agents", 5}});
  VectorEnv venv(env, 8);
  auto key = prng::key_from_seed(17);

  auto [obs1, st1] = venv.reset(key);
  auto [obs2, st2] = venv.reset(key);
  CHECK(obs1 == obs2);
  for (size_t i = 0; i < 8; ++i) CHECK(st1.keys[i] == st2.keys[i]);

  // 8 instances with 5 possible room occupants: expect >= 2 distinct states.
  std::set<uint64_t> hashes;
  for (const auto& s : st1.states) hashes.insert(env->state_hash(*s));
  CHECK(hashes.size() >= 2);

  CHECK_THROWS_AS(VectorEnv(env, 0), ContractError);
}

TEST_CASE("step batch n=1 equals single step") {
  auto env = make_env("switch_riddle_v0");
  VectorEnv venv(env, 1);
  auto key = prng::key_from_seed(3);

  auto [obs, state] = venv.reset(key);
  auto keys = prng::split(state.keys[0], 3);
  auto actions = constant_batch(*env, 1, 1);

  auto batched = venv.step(state, actions);
  auto single = env->step(keys[0], *state.states[0], actions[0]);

  CHECK(batched.rewards[0] == single.rewards);
  CHECK(batched.dones[0] == single.dones);
  CHECK(batched.obs[0] == single.obs);  // not done on step 1, no auto-reset
  CHECK(batched.next.keys[0] == keys[2]);
}

TEST_CASE("episode bookkeeping and auto-reset on one-step episodes") {
  auto env = make_env("bandit_v0", Config{{"arm_rewards", {0.5, 2.0}}});
  VectorEnv venv(env, 4);
  auto [obs, state] = venv.reset(prng::key_from_seed(0));

  auto r = venv.step(state, constant_batch(*env, 4, 1));
  for (size_t i = 0; i < 4; ++i) {
    CHECK(r.finished[i] == 1);
    CHECK(r.final_returns[i] == 2.0);
    CHECK(r.final_lengths[i] == 1);
    CHECK(r.next.episode_returns[i] == 0.0);
    CHECK(r.next.episode_lengths[i] == 0);
    // auto-reset produced a fresh (non-terminal) state: stepping works
    CHECK(r.obs[i].at("agent_0") == Obs{1.0f});
    CHECK(r.infos[i].at("agent_0").at("episode_return") == 2.0);
  }
  auto r2 = venv.step(r.next, constant_batch(*env, 4, 0));
  for (size_t i = 0; i < 4; ++i) CHECK(r2.final_returns[i] == 0.5);
}

TEST_CASE("no transition lost or duplicated across episode boundaries") {
  auto env = make_env("switch_riddle_v0");
  VectorEnv venv(env, 6);
  auto [obs, state] = venv.reset(prng::key_from_seed(11));

  int total_steps = 0, finished_steps = 0;
  auto act_keys = prng::split(prng::key_from_seed(99), 50);
  for (int t = 0; t < 50; ++t) {
    // random-ish mix of noop/toggle/tell so episodes end at varied lengths
    std::vector<AgentMap<Action>> acts(6);
    for (size_t i = 0; i < 6; ++i)
      for (size_t a = 0; a < env->agents().size(); ++a)
        acts[i].emplace(env->agents()[a],
                        int(prng::bits(act_keys[size_t(t)], i * 8 + a) % 3));
    auto r = venv.step(state, acts);
    total_steps += 6;
    for (size_t i = 0; i < 6; ++i)
      if (r.finished[i]) finished_steps += r.final_lengths[i];
    state = r.next;
  }
  int in_flight = 0;
  for (int len : state.episode_lengths) in_flight += len;
  CHECK(finished_steps + in_flight == total_steps);
}

TEST_CASE("batch results identical across 1, 4, 16 worker threads") {
  auto env = make_env("switch_riddle_v0", Config{{"n_agents", 4}});
  auto run = [&] {
    VectorEnv venv(env, 16);
    auto [obs, state] = venv.reset(prng::key_from_seed(21));
    std::vector<StepBatchResult> steps;
    for (int t = 0; t < 12; ++t) {
      auto r = venv.step(state, constant_batch(*env, 16, t % 3));
      state = r.next;
      steps.push_back(std::move(r));
    }
    return steps;
  };

  auto& pool = ThreadPool::global();
  pool.resize(1);
  auto a = run();
  pool.resize(4);
  auto b = run();
  pool.resize(16);
  auto c = run();
  pool.resize(4);

  REQUIRE(a.size() == b.size());
  REQUIRE(a.size() == c.size());
  for (size_t t = 0; t < a.size(); ++t) {
    CHECK(a[t].obs == b[t].obs);
    CHECK(a[t].obs == c[t].obs);
    CHECK(a[t].rewards == b[t].rewards);
    CHECK(a[t].rewards == c[t].rewards);
    CHECK(a[t].finished == b[t].finished);
    CHECK(a[t].finished == c[t].finished);
    for (size_t i = 0; i < 16; ++i) {
      CHECK(a[t].next.keys[i] == b[t].next.keys[i]);
      CHECK(a[t].next.keys[i] == c[t].next.keys[i]);
    }
  }
}

TEST_CASE("rollout records constant actions and is pure") {
  auto env = make_env("switch_riddle_v0");
  VectorEnv venv(env, 3);

  Policy policy = [&](const std::vector<AgentMap<Obs>>& obs) {
    PolicyOutput out;
    out.actions = constant_batch(*env, int(obs.size()), 1);
    return out;
  };

  auto t1 = rollout(venv, policy, 10, prng::key_from_seed(8));
  auto t2 = rollout(venv, policy, 10, prng::key_from_seed(8));
  CHECK(t1.n_steps == 10);
  CHECK(t1.n_envs == 3);
  for (int t = 0; t < 10; ++t)
    for (int e = 0; e < 3; ++e)
      for (const auto& a : t1.actions[size_t(t)][size_t(e)].values())
        CHECK(std::get<int>(a) == 1);
  for (int t = 0; t < 10; ++t) {
    CHECK(t1.obs[size_t(t)] == t2.obs[size_t(t)]);
    CHECK(t1.rewards[size_t(t)] == t2.rewards[size_t(t)]);
    CHECK(t1.dones[size_t(t)] == t2.dones[size_t(t)]);
  }
  CHECK(t1.final_obs == t2.final_obs);
}

TEST_CASE("rollout done counts match one-step episodes") {
  auto env = make_env("bandit_v0");
  VectorEnv venv(env, 5);
  Policy policy = [&](const std::vector<AgentMap<Obs>>& obs) {
    PolicyOutput out;
    out.actions = constant_batch(*env, int(obs.size()), 0);
    return out;
  };
  auto traj = rollout(venv, policy, 7, prng::key_from_seed(2));
  int dones = 0;
  for (const auto& step : traj.dones)
    for (const auto& d : step) dones += d.at("__all__") ? 1 : 0;
  CHECK(dones == 5 * 7);  // every step ends an episode
}

TEST_CASE("policy output size mismatch is a contract error") {
  auto env = make_env("bandit_v0");
  VectorEnv venv(env, 2);
  Policy bad = [&](const std::vector<AgentMap<Obs>>&) {
    PolicyOutput out;
    out.actions = constant_batch(*env, 1, 0);
    return out;
  };
  CHECK_THROWS_AS(rollout(venv, bad, 2, prng::key_from_seed(0)), ContractError);
}

TEST_CASE("throughput probe reports positive finite rates") {
  auto res = throughput_probe("switch_riddle_v0", 4, 50, prng::key_from_seed(1));
  CHECK(res.sps > 0);
  CHECK(std::isfinite(res.sps));
  CHECK(res.cold_seconds > 0);
  CHECK(res.env_id == "switch_riddle_v0");

  auto row = res.csv_row();
  CHECK(row.rfind("switch_riddle_v0,4,50,", 0) == 0);
  CHECK(std::count(row.begin(), row.end(), ',') == 4);
  CHECK(ThroughputResult::csv_header() == "env_id,n_envs,steps,seconds,sps");
}
