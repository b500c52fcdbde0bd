#pragma once

#include <string>
#include <type_traits>
#include <string_view>
#include <vector>

#include "marl/errors.hpp"

namespace marl {

// Insertion-ordered string->T map sized for a handful of agents.  Linear
// lookup beats hashing at these sizes and keeps iteration order deterministic.
template <class T>
class AgentMap {
  // vector<bool>'s proxy references break at(); store flags as uint8_t.
  static_assert(!std::is_same_v<T, bool>, "use uint8_t for flag maps");

 public:
  AgentMap() = default;

  void emplace(std::string key, T value) {
    keys_.push_back(std::move(key));
    values_.push_back(std::move(value));
  }

  bool contains(std::string_view key) const { return find(key) >= 0; }

  const T& at(std::string_view key) const {
    int i = find(key);
    if (i < 0) throw ContractError("AgentMap: no entry for '" + std::string(key) + "'");
    return values_[size_t(i)];
  }
  T& at(std::string_view key) {
    return const_cast<T&>(static_cast<const AgentMap*>(this)->at(key));
  }

  size_t size() const { return keys_.size(); }
  bool empty() const { return keys_.empty(); }

  const std::vector<std::string>& keys() const { return keys_; }
  const std::vector<T>& values() const { return values_; }
  std::vector<T>& values() { return values_; }

  const std::string& key(size_t i) const { return keys_[i]; }
  const T& value(size_t i) const { return values_[i]; }
  T& value(size_t i) { return values_[i]; }

  void clear() {
    keys_.clear();
    values_.clear();
  }

  friend bool operator==(const AgentMap&, const AgentMap&) = default;

 private:
  int find(std::string_view key) const {
    for (size_t i = 0; i < keys_.size(); ++i)
      if (keys_[i] == key) return int(i);
    return -1;
  }

  std::vector<std::string> keys_;
  std::vector<T> values_;
};

}  // namespace marl
