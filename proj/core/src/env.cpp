#include "marl/env.hpp"

#include "marl/errors.hpp"

namespace marl {

void Env::validate_actions(const AgentMap<Action>& actions) const {
  for (const auto& agent : agents_) {
    if (!actions.contains(agent))
      throw ContractError(id() + ": step() missing action for agent '" + agent + "'");
    if (!action_space(agent).contains(actions.at(agent)))
      throw ContractError(id() + ": action for agent '" + agent + "' is outside its action space");
  }
}

}  // namespace marl
