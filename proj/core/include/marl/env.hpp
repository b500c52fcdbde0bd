#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "marl/agent_map.hpp"
#include "marl/prng.hpp"
#include "marl/spaces.hpp"

namespace marl {

using Obs = std::vector<float>;
using Info = std::map<std::string, double>;

// Key under which the joint episode-done flag appears in StepResult::dones.
inline constexpr const char* kAllAgents = "__all__";

struct EnvState {
  virtual ~EnvState() = default;
};
using StatePtr = std::shared_ptr<const EnvState>;

struct StepResult {
  AgentMap<Obs> obs;
  StatePtr state;
  AgentMap<double> rewards;
  AgentMap<uint8_t> dones;  // one flag per agent plus "__all__" (0/1)
  AgentMap<Info> infos;
};

// An environment instance is immutable after construction; all dynamics live
// in EnvState values.  reset/step are pure: same key + state + actions in,
// same result out, and the input state is never modified.
class Env {
 public:
  virtual ~Env() = default;

  virtual std::string id() const = 0;

  const std::vector<std::string>& agents() const { return agents_; }
  int num_agents() const { return int(agents_.size()); }

  virtual SpaceDescriptor observation_space(const std::string& agent) const = 0;
  virtual SpaceDescriptor action_space(const std::string& agent) const = 0;

  virtual std::pair<AgentMap<Obs>, StatePtr> reset(const PrngKey& key) const = 0;

  // `actions` must contain an entry for every agent, including agents that are
  // done or not acting this turn (their entries are ignored).
  virtual StepResult step(const PrngKey& key, const EnvState& state,
                          const AgentMap<Action>& actions) const = 0;

  // Hard episode-length cap enforced by the env itself.
  virtual int max_steps() const = 0;

  // True when every agent always receives the identical reward signal.
  virtual bool cooperative() const { return false; }

  // Global state for centralised critics/mixers; nullopt when unsupported.
  virtual std::optional<std::vector<float>> world_state(const EnvState&) const {
    return std::nullopt;
  }
  virtual int world_state_size() const { return 0; }

  // Mask over the agent's discrete actions; default: everything legal.
  virtual std::vector<uint8_t> legal_actions(const EnvState&, const std::string& agent) const {
    return std::vector<uint8_t>(size_t(action_space(agent).n), 1);
  }

  // False when the agent is out of play in this state (e.g. a destroyed unit)
  // and its transitions should not contribute to training losses.
  virtual bool agent_active(const EnvState&, const std::string&) const { return true; }

  virtual std::string render(const EnvState&) const { return {}; }

  // Order-independent digest of the full env state; 0 when unsupported.
  virtual uint64_t state_hash(const EnvState&) const { return 0; }

 protected:
  // Throws unless `actions` covers every agent with an in-space value.
  void validate_actions(const AgentMap<Action>& actions) const;

  std::vector<std::string> agents_;
};

}  // namespace marl
