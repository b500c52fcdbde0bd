#include "marl/algo/team.hpp"

#include <algorithm>
#include <cstring>

#include "marl/errors.hpp"

namespace marl {

TeamLayout TeamLayout::from_env(const Env& env) {
  TeamLayout t;
  t.agents = env.agents();
  for (const auto& agent : t.agents) {
    auto ospace = env.observation_space(agent);
    auto aspace = env.action_space(agent);
    if (aspace.kind != SpaceDescriptor::Kind::kDiscrete)
      throw SchemaError(env.id() + ": trainers support discrete action spaces only (agent '" +
                        agent + "')");
    t.obs_dim = std::max(t.obs_dim, ospace.flat_size());
    t.n_actions = std::max(t.n_actions, aspace.n);
    t.agent_actions.push_back(aspace.n);
  }
  t.in_dim = t.obs_dim + (t.agents.size() > 1 ? int(t.agents.size()) : 0);
  return t;
}

void TeamLayout::write_input(const Obs& obs, int agent_idx, float* dst) const {
  if (int(obs.size()) > obs_dim)
    throw ContractError("TeamLayout: observation wider than layout obs_dim");
  std::memcpy(dst, obs.data(), obs.size() * sizeof(float));
  std::memset(dst + obs.size(), 0, size_t(in_dim - int(obs.size())) * sizeof(float));
  if (one_hot()) dst[obs_dim + agent_idx] = 1.0f;
}

void TeamLayout::write_legal(const Env& env, const EnvState& state, int agent_idx,
                             uint8_t* dst) const {
  auto mask = env.legal_actions(state, agents[size_t(agent_idx)]);
  if (int(mask.size()) != agent_actions[size_t(agent_idx)])
    throw ContractError("TeamLayout: legal mask width disagrees with the action space");
  std::memcpy(dst, mask.data(), mask.size());
  std::memset(dst + mask.size(), 0, size_t(n_actions - int(mask.size())));
}

}  // namespace marl
