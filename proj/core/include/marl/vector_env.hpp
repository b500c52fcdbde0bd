#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "marl/config.hpp"
#include "marl/env.hpp"

namespace marl {

struct BatchedState {
  std::vector<StatePtr> states;
  std::vector<PrngKey> keys;  // per-instance carry keys, advanced every step
  std::vector<double> episode_returns;  // running per-env sum of mean agent reward
  std::vector<int> episode_lengths;

  size_t size() const { return states.size(); }
};

struct StepBatchResult {
  // Post-auto-reset views: where an episode ended, obs/state are the fresh
  // episode's and the terminal data lands in the final_* fields below.
  std::vector<AgentMap<Obs>> obs;
  std::vector<AgentMap<double>> rewards;
  std::vector<AgentMap<uint8_t>> dones;
  std::vector<AgentMap<Info>> infos;

  std::vector<uint8_t> finished;        // dones["__all__"] per instance
  std::vector<AgentMap<Obs>> final_obs;  // terminal observation, valid where finished
  std::vector<double> final_returns;
  std::vector<int> final_lengths;

  BatchedState next;
};

struct PolicyOutput {
  std::vector<AgentMap<Action>> actions;
  std::vector<AgentMap<double>> log_probs;
  std::vector<AgentMap<double>> values;
};
using Policy = std::function<PolicyOutput(const std::vector<AgentMap<Obs>>&)>;

struct TrajectoryBatch {
  int n_steps = 0;
  int n_envs = 0;
  // Indexed [step][env].
  std::vector<std::vector<AgentMap<Obs>>> obs;
  std::vector<std::vector<AgentMap<Action>>> actions;
  std::vector<std::vector<AgentMap<double>>> rewards;
  std::vector<std::vector<AgentMap<uint8_t>>> dones;
  std::vector<std::vector<AgentMap<double>>> log_probs;
  std::vector<std::vector<AgentMap<double>>> values;
  std::vector<AgentMap<Obs>> final_obs;
  BatchedState final_state;
};

struct ThroughputResult {
  std::string env_id;
  int n_envs = 0;
  int steps = 0;       // sequential batch steps timed
  double seconds = 0;  // warm wall-clock for those steps
  double sps = 0;      // n_envs * steps / seconds
  double cold_seconds = 0;  // reset + one warmup batch step, reported alongside

  std::string csv_row() const;  // "env_id,n_envs,steps,seconds,sps"
  static std::string csv_header();
};

// Steps N independent instances of one env in parallel with per-instance key
// streams; finished instances auto-reset with a child of their own key, so
// batch results are identical for any worker-thread count.
class VectorEnv {
 public:
  VectorEnv(std::shared_ptr<const Env> env, int n_envs);

  const Env& env() const { return *env_; }
  int n_envs() const { return n_envs_; }

  std::pair<std::vector<AgentMap<Obs>>, BatchedState> reset(const PrngKey& key) const;

  StepBatchResult step(const BatchedState& state,
                       const std::vector<AgentMap<Action>>& actions) const;

 private:
  std::shared_ptr<const Env> env_;
  int n_envs_;
};

TrajectoryBatch rollout(const VectorEnv& venv, const Policy& policy, int n_steps,
                        const PrngKey& key);

// Times uniform-random-legal-action stepping; excludes construction, reset and
// one warmup batch step from the warm figure (reported as cold_seconds).
ThroughputResult throughput_probe(const std::string& env_id, int n_envs, int n_steps,
                                  const PrngKey& key, const Config& env_config);
ThroughputResult throughput_probe(const std::string& env_id, int n_envs, int n_steps,
                                  const PrngKey& key);

}  // namespace marl
