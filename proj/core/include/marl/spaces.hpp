#pragma once

#include <variant>
#include <vector>

#include "marl/prng.hpp"

namespace marl {

// A discrete action is an id; a continuous one is a flat float vector.
using Action = std::variant<int, std::vector<float>>;

struct SpaceDescriptor {
  enum class Kind { kDiscrete, kBox };

  Kind kind = Kind::kDiscrete;
  int n = 0;               // discrete: number of actions, >= 1
  std::vector<int> shape;  // box
  float low = 0.0f, high = 0.0f;

  static SpaceDescriptor discrete(int n);
  static SpaceDescriptor box(std::vector<int> shape, float low, float high);

  int flat_size() const;
  bool contains(const Action& a) const;
  Action sample(const PrngKey& key) const;

  friend bool operator==(const SpaceDescriptor&, const SpaceDescriptor&) = default;
};

}  // namespace marl
