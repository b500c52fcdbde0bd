#pragma once

#include <stdexcept>
#include <string>

namespace marl {

// Unknown env id, missing file, absent checkpoint field, ...
struct NotFoundError : std::runtime_error {
  explicit NotFoundError(const std::string& what) : std::runtime_error(what) {}
};

// Config rejected: unknown key, wrong type, out-of-range value.
struct SchemaError : std::runtime_error {
  explicit SchemaError(const std::string& what) : std::runtime_error(what) {}
};

// Caller broke an API contract (bad shapes, missing agent, action out of space).
struct ContractError : std::invalid_argument {
  explicit ContractError(const std::string& what) : std::invalid_argument(what) {}
};

// Training produced non-finite numbers and cannot continue.
struct DivergenceError : std::runtime_error {
  explicit DivergenceError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace marl
