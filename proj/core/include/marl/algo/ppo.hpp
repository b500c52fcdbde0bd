#pragma once

// IPPO and MAPPO: clipped-surrogate PPO with one parameter-shared actor and
// one critic serving all agents. IPPO's critic reads the same (padded,
// id-tagged) observation as the actor; MAPPO's critic reads the environment's
// global state instead, so the two trainers differ only in the critic input.
//
// Each update collects n_envs x n_rollout_steps transitions through the
// vector engine, computes GAE, then runs update_epochs passes of
// n_minibatches Adam steps (joint actor+critic parameter vector,
// global-norm-clipped). Feed-forward nets shuffle flattened transitions;
// recurrent nets shuffle whole sequences and replay them with hidden-state
// resets at episode boundaries. Rows belonging to inactive agents (e.g. dead
// units) are excluded from every loss term.
//
// When an env reports infos["shaped_reward"] (Overcooked), that signal is
// added to the training reward scaled by a factor annealing linearly from 1
// to 0 over the first half of training; logged episode returns always use
// the raw env reward.
//
// Determinism: a fixed (key, config) pair yields a byte-identical metrics
// table for any worker-thread count. Wall-clock data lives in a separate
// timings table for that reason.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "marl/algo/actor_critic.hpp"
#include "marl/algo/metrics.hpp"
#include "marl/algo/team.hpp"
#include "marl/config.hpp"
#include "marl/env.hpp"

namespace marl {

struct PpoConfig {
  int64_t total_timesteps = 1'000'000;
  int n_envs = 16;
  int n_rollout_steps = 128;
  double lr = 5e-4;
  bool anneal_lr = true;
  int update_epochs = 5;
  int n_minibatches = 2;
  double gamma = 0.99;
  double gae_lambda = 1.0;
  double clip_eps = 0.3;
  double ent_coef = 0.01;
  double vf_coef = 1.0;
  double max_grad_norm = 0.5;
  std::string activation = "tanh";  // "tanh" | "relu"
  bool recurrent = false;
  int n_fc_layers = 2;  // feed-forward torso depth (recurrent nets use 1+1)
  int fc_width = 64;
  int hidden_width = 128;      // GRU size (recurrent only)
  bool shaped_rewards = true;  // apply annealed infos["shaped_reward"] when present

  void validate() const;                            // SchemaError on bad values
  static PpoConfig from_config(const Config& cfg);  // SchemaError on bad keys
  Config to_config() const;
};

// Network dimensions implied by an env + config under parameter sharing.
struct PpoNetSpec {
  int in_dim = 0;      // actor input: padded obs (+ agent one-hot)
  int critic_in = 0;   // = in_dim (IPPO) or world_state_size (MAPPO)
  int n_actions = 0;   // padded action head width
  bool recurrent = false;
  nn::Act act = nn::Act::kTanh;
  int n_fc_layers = 2, fc_width = 64, hidden_width = 128;
};

struct PpoNets {
  PpoNetSpec spec;
  nn::FfBranch<float> actor_ff, critic_ff;
  nn::RnnBranch<float> actor_rnn, critic_rnn;

  std::vector<float> pack_actor() const;
  std::vector<float> pack_critic() const;
  void unpack_actor(const std::vector<float>& flat);
  void unpack_critic(const std::vector<float>& flat);
};

// Deterministic initialization: actor head gain 0.01, critic head gain 1.
PpoNets ppo_init_nets(const PrngKey& key, const PpoNetSpec& spec);
PpoNetSpec ppo_net_spec(const Env& env, const PpoConfig& cfg, bool centralized_critic);

struct PpoRunResult {
  PpoNets nets;          // final parameters (or last good ones if diverged)
  MetricTable metrics;   // deterministic learning curve
  MetricTable timings;   // wall-clock sps per update
  bool diverged = false;
  int64_t steps_done = 0;
};

PpoRunResult train_ippo(std::shared_ptr<const Env> env, const PpoConfig& cfg, const PrngKey& key);
// Requires env.world_state_size() > 0; throws SchemaError otherwise.
PpoRunResult train_mappo(std::shared_ptr<const Env> env, const PpoConfig& cfg, const PrngKey& key);

// Stateful policy wrapper for evaluation/rendering: feeds observations
// through the trained actor (greedy argmax or sampling) and carries the
// recurrent hidden state across steps.
class PpoActor {
 public:
  PpoActor(std::shared_ptr<const Env> env, PpoNets nets);

  void begin_episode();
  AgentMap<Action> act(const EnvState& state, const AgentMap<Obs>& obs, const PrngKey& key,
                       bool greedy);

 private:
  std::shared_ptr<const Env> env_;
  PpoNets nets_;
  TeamLayout layout_;
  nn::Mat<float> hidden_;
};

}  // namespace marl
