#include <benchmark/benchmark.h>
#include "marl/prng.hpp"

static void BM_threefry_block(benchmark::State& state) {
  auto key = marl::prng::key_from_seed(1);
  uint64_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(marl::prng::bits(key, i++));
}
BENCHMARK(BM_threefry_block);

BENCHMARK_MAIN();
