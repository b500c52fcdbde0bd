#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "marl/config.hpp"
#include "marl/env.hpp"

namespace marl {

using EnvFactory = std::function<std::shared_ptr<const Env>(const Config&)>;

// Registering a duplicate or reserved id throws ContractError.
void register_env(const std::string& id, EnvFactory factory);

// Instantiates `id` with an env-specific config (unknown keys rejected).
std::shared_ptr<const Env> make_env(const std::string& id, const Config& config = Config::object());

// All instantiable ids, sorted.
std::vector<std::string> registered_envs();

// Ids claimed for scenarios that intentionally have no implementation yet;
// make_env names them in its error instead of treating them as typos.
std::vector<std::string> reserved_envs();

bool is_registered(const std::string& id);

}  // namespace marl
