#include "marl/vector_env.hpp"

#include <chrono>
#include <cstdio>

#include "marl/errors.hpp"
#include "marl/parallel.hpp"
#include "marl/registry.hpp"

namespace marl {

namespace {

double team_reward(const AgentMap<double>& rewards) {
  double sum = 0;
  for (double r : rewards.values()) sum += r;
  return rewards.empty() ? 0.0 : sum / double(rewards.size());
}

// Uniform draw over the set bits of a legality mask.
int legal_uniform(uint64_t raw, const std::vector<uint8_t>& mask) {
  int n_legal = 0;
  for (uint8_t m : mask) n_legal += m ? 1 : 0;
  if (n_legal == 0) throw ContractError("no legal action available");
  int pick = int(raw % uint64_t(n_legal));
  for (size_t a = 0; a < mask.size(); ++a) {
    if (!mask[a]) continue;
    if (pick == 0) return int(a);
    --pick;
  }
  return int(mask.size()) - 1;  // unreachable
}

}  // namespace

std::string ThroughputResult::csv_header() { return "env_id,n_envs,steps,seconds,sps"; }

std::string ThroughputResult::csv_row() const {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%s,%d,%d,%.6f,%.2f", env_id.c_str(), n_envs, steps, seconds,
                sps);
  return buf;
}

VectorEnv::VectorEnv(std::shared_ptr<const Env> env, int n_envs)
    : env_(std::move(env)), n_envs_(n_envs) {
  if (!env_) throw ContractError("VectorEnv: null env");
  if (n_envs_ < 1) throw ContractError("VectorEnv: n_envs must be >= 1");
}

std::pair<std::vector<AgentMap<Obs>>, BatchedState> VectorEnv::reset(const PrngKey& key) const {
  auto reset_keys = prng::split(key, size_t(n_envs_));
  // Carry keys live in a separate stream so the per-instance key never
  // collides with anything the env derived from its reset key.
  auto carry_keys = prng::split(prng::fold_in(key, 1), size_t(n_envs_));

  std::vector<AgentMap<Obs>> obs{size_t(n_envs_)};
  BatchedState state;
  state.states.resize(size_t(n_envs_));
  state.keys = std::move(carry_keys);
  state.episode_returns.assign(size_t(n_envs_), 0.0);
  state.episode_lengths.assign(size_t(n_envs_), 0);

  ThreadPool::global().for_each(size_t(n_envs_), [&](size_t i) {
    auto [o, s] = env_->reset(reset_keys[i]);
    obs[i] = std::move(o);
    state.states[i] = std::move(s);
  });
  return {std::move(obs), std::move(state)};
}

StepBatchResult VectorEnv::step(const BatchedState& state,
                                const std::vector<AgentMap<Action>>& actions) const {
  if (state.size() != size_t(n_envs_))
    throw ContractError("VectorEnv::step: state batch size mismatch");
  if (actions.size() != size_t(n_envs_))
    throw ContractError("VectorEnv::step: expected " + std::to_string(n_envs_) +
                        " action maps, got " + std::to_string(actions.size()));

  StepBatchResult out;
  size_t n = size_t(n_envs_);
  out.obs.resize(n);
  out.rewards.resize(n);
  out.dones.resize(n);
  out.infos.resize(n);
  out.finished.assign(n, 0);
  out.final_obs.resize(n);
  out.final_returns.assign(n, 0.0);
  out.final_lengths.assign(n, 0);
  out.next.states.resize(n);
  out.next.keys.resize(n);
  out.next.episode_returns.assign(n, 0.0);
  out.next.episode_lengths.assign(n, 0);

  ThreadPool::global().for_each(n, [&](size_t i) {
    auto keys = prng::split(state.keys[i], 3);  // step / auto-reset / carry
    StepResult r = env_->step(keys[0], *state.states[i], actions[i]);

    double ep_return = state.episode_returns[i] + team_reward(r.rewards);
    int ep_length = state.episode_lengths[i] + 1;
    bool done = r.dones.at(kAllAgents) != 0;

    out.rewards[i] = std::move(r.rewards);
    out.dones[i] = std::move(r.dones);
    out.infos[i] = std::move(r.infos);

    if (done) {
      out.finished[i] = 1;
      out.final_obs[i] = std::move(r.obs);
      out.final_returns[i] = ep_return;
      out.final_lengths[i] = ep_length;
      for (auto& info : out.infos[i].values()) {
        info["episode_return"] = ep_return;
        info["episode_length"] = double(ep_length);
      }
      auto [o2, s2] = env_->reset(keys[1]);
      out.obs[i] = std::move(o2);
      out.next.states[i] = std::move(s2);
      // returns/lengths restart at zero
    } else {
      out.obs[i] = std::move(r.obs);
      out.next.states[i] = std::move(r.state);
      out.next.episode_returns[i] = ep_return;
      out.next.episode_lengths[i] = ep_length;
    }
    out.next.keys[i] = keys[2];
  });
  return out;
}

TrajectoryBatch rollout(const VectorEnv& venv, const Policy& policy, int n_steps,
                        const PrngKey& key) {
  if (n_steps < 1) throw ContractError("rollout: n_steps must be >= 1");

  TrajectoryBatch traj;
  traj.n_steps = n_steps;
  traj.n_envs = venv.n_envs();
  traj.obs.reserve(size_t(n_steps));

  auto [obs, state] = venv.reset(key);
  for (int t = 0; t < n_steps; ++t) {
    PolicyOutput pi = policy(obs);
    if (pi.actions.size() != size_t(venv.n_envs()))
      throw ContractError("rollout: policy returned " + std::to_string(pi.actions.size()) +
                          " action maps for " + std::to_string(venv.n_envs()) + " envs");
    if (!pi.log_probs.empty() && pi.log_probs.size() != size_t(venv.n_envs()))
      throw ContractError("rollout: policy log_probs batch size mismatch");
    if (!pi.values.empty() && pi.values.size() != size_t(venv.n_envs()))
      throw ContractError("rollout: policy values batch size mismatch");

    StepBatchResult r = venv.step(state, pi.actions);
    traj.obs.push_back(std::move(obs));
    traj.actions.push_back(std::move(pi.actions));
    traj.rewards.push_back(std::move(r.rewards));
    traj.dones.push_back(std::move(r.dones));
    traj.log_probs.push_back(std::move(pi.log_probs));
    traj.values.push_back(std::move(pi.values));

    obs = std::move(r.obs);
    state = std::move(r.next);
  }
  traj.final_obs = std::move(obs);
  traj.final_state = std::move(state);
  return traj;
}

namespace {

std::vector<AgentMap<Action>> random_legal_actions(const Env& env, const BatchedState& state,
                                                   const PrngKey& step_key, int n_envs) {
  auto env_keys = prng::split(step_key, size_t(n_envs));
  std::vector<AgentMap<Action>> actions{size_t(n_envs)};
  for (size_t i = 0; i < size_t(n_envs); ++i) {
    uint64_t j = 0;
    for (const auto& agent : env.agents()) {
      auto space = env.action_space(agent);
      if (space.kind == SpaceDescriptor::Kind::kDiscrete) {
        auto mask = env.legal_actions(*state.states[i], agent);
        actions[i].emplace(agent, legal_uniform(prng::bits(env_keys[i], j), mask));
      } else {
        actions[i].emplace(agent, space.sample(prng::fold_in(env_keys[i], j)));
      }
      ++j;
    }
  }
  return actions;
}

}  // namespace

ThroughputResult throughput_probe(const std::string& env_id, int n_envs, int n_steps,
                                  const PrngKey& key, const Config& env_config) {
  using clock = std::chrono::steady_clock;
  auto env = make_env(env_id, env_config);
  VectorEnv venv(env, n_envs);

  ThroughputResult res;
  res.env_id = env_id;
  res.n_envs = n_envs;
  res.steps = n_steps;

  auto action_keys = prng::split(prng::fold_in(key, 2), size_t(n_steps) + 1);

  auto cold_start = clock::now();
  auto [obs, state] = venv.reset(key);
  {
    auto warm = venv.step(state, random_legal_actions(*env, state, action_keys[size_t(n_steps)],
                                                      n_envs));
    state = std::move(warm.next);
  }
  res.cold_seconds = std::chrono::duration<double>(clock::now() - cold_start).count();

  auto warm_start = clock::now();
  for (int t = 0; t < n_steps; ++t) {
    auto r = venv.step(state, random_legal_actions(*env, state, action_keys[size_t(t)], n_envs));
    state = std::move(r.next);
  }
  res.seconds = std::chrono::duration<double>(clock::now() - warm_start).count();
  if (res.seconds <= 0) res.seconds = 1e-9;
  res.sps = double(n_envs) * double(n_steps) / res.seconds;
  return res;
}

ThroughputResult throughput_probe(const std::string& env_id, int n_envs, int n_steps,
                                  const PrngKey& key) {
  return throughput_probe(env_id, n_envs, n_steps, key, Config::object());
}

}  // namespace marl
