#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace marl {

// Counter-based random key: a 64-bit cipher key plus a 64-bit stream counter.
// Keys are values, never mutated in place; every draw addresses an absolute
// block of the keyed stream, so results depend only on (key, call arguments).
struct PrngKey {
  uint32_t k0 = 0, k1 = 0;  // cipher key words
  uint32_t c0 = 0, c1 = 0;  // counter base, c1:c0 = little-endian 64-bit

  friend bool operator==(const PrngKey&, const PrngKey&) = default;
};

namespace prng {

// Core block cipher: 20-round Threefry-2x32.
void threefry2x32(uint32_t k0, uint32_t k1, uint32_t x0, uint32_t x1,
                  uint32_t* y0, uint32_t* y1);

PrngKey key_from_seed(uint64_t seed);

// 32 lowercase hex chars: k0 k1 c0 c1, each as 8 chars big-endian.
std::string to_hex(const PrngKey& key);
PrngKey from_hex(const std::string& hex);

// Raw 64-bit block `index` of this key's stream.
uint64_t bits(const PrngKey& key, uint64_t index);

// n statistically independent child keys.  Children are derived from blocks
// in the upper half of the counter space (offset 2^63), which sampling calls
// never touch, so a child never aliases a draw made from the parent.
std::vector<PrngKey> split(const PrngKey& key, size_t n);
PrngKey fold_in(const PrngKey& key, uint64_t data);

// Uniform doubles in [lo, hi) built from the top 53 bits of each block.
std::vector<double> uniform(const PrngKey& key, size_t n, double lo = 0.0, double hi = 1.0);
double uniform1(const PrngKey& key, double lo = 0.0, double hi = 1.0);

// Integers in [lo, hi).
std::vector<int> randint(const PrngKey& key, size_t n, int lo, int hi);
int randint1(const PrngKey& key, int lo, int hi);

// Index draw proportional to non-negative weights (at least one positive).
size_t choice(const PrngKey& key, const std::vector<double>& weights);

// Fisher-Yates shuffle of 0..n-1.
std::vector<int> permutation(const PrngKey& key, int n);

// Standard normal draws (Box-Muller).
std::vector<double> normal(const PrngKey& key, size_t n);

bool bernoulli(const PrngKey& key, double p);

}  // namespace prng
}  // namespace marl
