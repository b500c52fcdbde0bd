#include "marl/prng.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include "marl/errors.hpp"

namespace marl::prng {

namespace {

inline uint32_t rotl32(uint32_t x, int r) { return (x << r) | (x >> (32 - r)); }

// Counter block `offset` past the key's base counter.
inline uint64_t block_at(const PrngKey& key, uint64_t offset) {
  uint64_t ctr = ((uint64_t(key.c1) << 32) | key.c0) + offset;
  uint32_t y0, y1;
  threefry2x32(key.k0, key.k1, uint32_t(ctr & 0xffffffffu), uint32_t(ctr >> 32), &y0, &y1);
  return (uint64_t(y0) << 32) | y1;
}

// Split material lives in the upper half of the counter space.
constexpr uint64_t kSplitBase = uint64_t(1) << 63;

inline double to_unit(uint64_t block) {
  // top 53 bits -> [0, 1)
  return double(block >> 11) * 0x1.0p-53;
}

}  // namespace

void threefry2x32(uint32_t k0, uint32_t k1, uint32_t x0, uint32_t x1,
                  uint32_t* y0, uint32_t* y1) {
  static constexpr int kRot[8] = {13, 15, 26, 6, 17, 29, 16, 24};
  const uint32_t ks[3] = {k0, k1, 0x1BD11BDAu ^ k0 ^ k1};

  x0 += ks[0];
  x1 += ks[1];
  auto four_rounds = [&](int base) {
    for (int r = 0; r < 4; ++r) {
      x0 += x1;
      x1 = rotl32(x1, kRot[base + r]);
      x1 ^= x0;
    }
  };
  four_rounds(0); x0 += ks[1]; x1 += ks[2] + 1;
  four_rounds(4); x0 += ks[2]; x1 += ks[0] + 2;
  four_rounds(0); x0 += ks[0]; x1 += ks[1] + 3;
  four_rounds(4); x0 += ks[1]; x1 += ks[2] + 4;
  four_rounds(0); x0 += ks[2]; x1 += ks[0] + 5;
  *y0 = x0;
  *y1 = x1;
}

PrngKey key_from_seed(uint64_t seed) {
  return PrngKey{uint32_t(seed & 0xffffffffu), uint32_t(seed >> 32), 0, 0};
}

std::string to_hex(const PrngKey& key) {
  char buf[33];
  std::snprintf(buf, sizeof(buf), "%08x%08x%08x%08x", key.k0, key.k1, key.c0, key.c1);
  return std::string(buf, 32);
}

PrngKey from_hex(const std::string& hex) {
  if (hex.size() != 32) throw ContractError("key hex must be exactly 32 chars, got " + std::to_string(hex.size()));
  uint32_t w[4];
  for (int i = 0; i < 4; ++i) {
    uint32_t v = 0;
    for (int j = 0; j < 8; ++j) {
      char c = hex[size_t(i) * 8 + j];
      uint32_t d;
      if (c >= '0' && c <= '9') d = uint32_t(c - '0');
      else if (c >= 'a' && c <= 'f') d = uint32_t(c - 'a' + 10);
      else if (c >= 'A' && c <= 'F') d = uint32_t(c - 'A' + 10);
      else throw ContractError(std::string("key hex contains non-hex char '") + c + "'");
      v = (v << 4) | d;
    }
    w[i] = v;
  }
  return PrngKey{w[0], w[1], w[2], w[3]};
}

uint64_t bits(const PrngKey& key, uint64_t index) { return block_at(key, index); }

std::vector<PrngKey> split(const PrngKey& key, size_t n) {
  if (n == 0) throw ContractError("split: n must be >= 1");
  std::vector<PrngKey> out(n);
  for (size_t i = 0; i < n; ++i) {
    uint64_t a = block_at(key, kSplitBase + 2 * i);
    uint64_t b = block_at(key, kSplitBase + 2 * i + 1);
    out[i] = PrngKey{uint32_t(a >> 32), uint32_t(a & 0xffffffffu),
                     uint32_t(b & 0xffffffffu), uint32_t(b >> 32)};
  }
  return out;
}

PrngKey fold_in(const PrngKey& key, uint64_t data) {
  // Same derivation as split but indexed from the quarter point of the upper
  // half, so fold_in(k, i) never collides with split(k, n) children.
  uint64_t base = kSplitBase + (uint64_t(1) << 62);
  uint64_t a = block_at(key, base + 2 * data);
  uint64_t b = block_at(key, base + 2 * data + 1);
  return PrngKey{uint32_t(a >> 32), uint32_t(a & 0xffffffffu),
                 uint32_t(b & 0xffffffffu), uint32_t(b >> 32)};
}

std::vector<double> uniform(const PrngKey& key, size_t n, double lo, double hi) {
  if (!(lo < hi)) throw ContractError("uniform: need lo < hi");
  std::vector<double> out(n);
  for (size_t i = 0; i < n; ++i) {
    double v = lo + to_unit(bits(key, i)) * (hi - lo);
    if (v >= hi) v = std::nextafter(hi, lo);  // fp rounding guard
    out[i] = v;
  }
  return out;
}

double uniform1(const PrngKey& key, double lo, double hi) { return uniform(key, 1, lo, hi)[0]; }

std::vector<int> randint(const PrngKey& key, size_t n, int lo, int hi) {
  if (lo >= hi) throw ContractError("randint: need lo < hi");
  uint64_t range = uint64_t(int64_t(hi) - int64_t(lo));
  std::vector<int> out(n);
  for (size_t i = 0; i < n; ++i) out[i] = int(int64_t(lo) + int64_t(bits(key, i) % range));
  return out;
}

int randint1(const PrngKey& key, int lo, int hi) { return randint(key, 1, lo, hi)[0]; }

size_t choice(const PrngKey& key, const std::vector<double>& weights) {
  if (weights.empty()) throw ContractError("choice: empty weights");
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0 || !std::isfinite(w)) throw ContractError("choice: weights must be finite and >= 0");
    total += w;
  }
  if (total <= 0.0) throw ContractError("choice: weights sum to zero");
  double u = to_unit(bits(key, 0)) * total;
  double cum = 0.0;
  size_t last_positive = 0;
  for (size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] > 0.0) last_positive = i;
    cum += weights[i];
    if (u < cum) return i;
  }
  return last_positive;
}

std::vector<int> permutation(const PrngKey& key, int n) {
  if (n < 0) throw ContractError("permutation: n must be >= 0");
  std::vector<int> out(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) out[size_t(i)] = i;
  for (int i = n - 1; i > 0; --i) {
    uint64_t j = bits(key, uint64_t(i)) % uint64_t(i + 1);
    std::swap(out[size_t(i)], out[size_t(j)]);
  }
  return out;
}

std::vector<double> normal(const PrngKey& key, size_t n) {
  std::vector<double> out(n);
  size_t pairs = (n + 1) / 2;
  for (size_t p = 0; p < pairs; ++p) {
    // u1 in (0, 1] so log is finite
    double u1 = double((bits(key, 2 * p) >> 11) + 1) * 0x1.0p-53;
    double u2 = to_unit(bits(key, 2 * p + 1));
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * std::numbers::pi * u2;
    out[2 * p] = r * std::cos(theta);
    if (2 * p + 1 < n) out[2 * p + 1] = r * std::sin(theta);
  }
  return out;
}

bool bernoulli(const PrngKey& key, double p) {
  if (p < 0.0 || p > 1.0) throw ContractError("bernoulli: p must be in [0, 1]");
  return to_unit(bits(key, 0)) < p;
}

}  // namespace marl::prng
