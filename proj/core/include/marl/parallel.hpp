#pragma once

#include <functional>
#include <vector>

namespace marl {

// Fork-join pool with static chunking: parallel_for splits [0, n) into one
// contiguous range per thread.  Each index must touch only its own output
// slots; under that contract results are identical for any thread count.
class ThreadPool {
 public:
  explicit ThreadPool(int n_threads);
  ~ThreadPool();
  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  int size() const;

  // Runs fn(begin, end) on each static chunk; rethrows the first worker
  // exception.  Nested calls from inside a worker run inline.
  void parallel_for(size_t n, const std::function<void(size_t, size_t)>& fn);

  // Convenience wrapper over single indices.
  void for_each(size_t n, const std::function<void(size_t)>& fn);

  // Joins and respawns; only call between parallel_for invocations.
  void resize(int n_threads);

  // Process-wide pool; initial size from MARL_NUM_THREADS (default: hardware
  // concurrency, capped at 16).
  static ThreadPool& global();

 private:
  struct Impl;
  Impl* impl_;
};

}  // namespace marl
