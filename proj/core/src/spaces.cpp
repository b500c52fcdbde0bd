#include "marl/spaces.hpp"

#include <cmath>

#include "marl/errors.hpp"

namespace marl {

SpaceDescriptor SpaceDescriptor::discrete(int n) {
  if (n < 1) throw ContractError("discrete space needs n >= 1");
  SpaceDescriptor s;
  s.kind = Kind::kDiscrete;
  s.n = n;
  return s;
}

SpaceDescriptor SpaceDescriptor::box(std::vector<int> shape, float low, float high) {
  if (!(low <= high)) throw ContractError("box space needs low <= high");
  if (shape.empty()) throw ContractError("box space needs a non-empty shape");
  for (int d : shape)
    if (d < 1) throw ContractError("box space dims must be >= 1");
  SpaceDescriptor s;
  s.kind = Kind::kBox;
  s.shape = std::move(shape);
  s.low = low;
  s.high = high;
  return s;
}

int SpaceDescriptor::flat_size() const {
  if (kind == Kind::kDiscrete) return n;
  int total = 1;
  for (int d : shape) total *= d;
  return total;
}

bool SpaceDescriptor::contains(const Action& a) const {
  if (kind == Kind::kDiscrete) {
    const int* id = std::get_if<int>(&a);
    return id != nullptr && *id >= 0 && *id < n;
  }
  const auto* vec = std::get_if<std::vector<float>>(&a);
  if (vec == nullptr || int(vec->size()) != flat_size()) return false;
  for (float v : *vec)
    if (!(v >= low && v <= high) || !std::isfinite(v)) return false;
  return true;
}

Action SpaceDescriptor::sample(const PrngKey& key) const {
  if (kind == Kind::kDiscrete) return int(prng::bits(key, 0) % uint64_t(n));
  auto u = prng::uniform(key, size_t(flat_size()), double(low), double(high));
  std::vector<float> out(u.size());
  for (size_t i = 0; i < u.size(); ++i) out[i] = float(u[i]);
  return out;
}

}  // namespace marl
