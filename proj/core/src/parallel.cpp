#include "marl/parallel.hpp"

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

#include "marl/errors.hpp"

namespace marl {

namespace {
thread_local bool t_inside_worker = false;

int clamp_threads(int n) {
  if (n < 1) n = 1;
  if (n > 256) n = 256;
  return n;
}
}  // namespace

struct ThreadPool::Impl {
  std::vector<std::thread> workers;
  std::mutex mu;
  std::condition_variable cv_start, cv_done;
  // Current job, valid while generation is odd-stepped per dispatch.
  const std::function<void(size_t, size_t)>* fn = nullptr;
  size_t n = 0;
  uint64_t generation = 0;
  int pending = 0;
  bool stopping = false;
  std::exception_ptr error;

  int total_threads = 1;  // workers + calling thread

  void worker_loop(int worker_id) {
    t_inside_worker = true;
    uint64_t seen = 0;
    while (true) {
      const std::function<void(size_t, size_t)>* job;
      size_t job_n;
      {
        std::unique_lock<std::mutex> lock(mu);
        cv_start.wait(lock, [&] { return stopping || generation != seen; });
        if (stopping) return;
        seen = generation;
        job = fn;
        job_n = n;
      }
      run_chunk(*job, job_n, worker_id);
      {
        std::lock_guard<std::mutex> lock(mu);
        if (--pending == 0) cv_done.notify_all();
      }
    }
  }

  // Chunk k of [0, n): the same partition regardless of which thread runs it.
  void run_chunk(const std::function<void(size_t, size_t)>& job, size_t job_n, int k) {
    size_t t = size_t(total_threads);
    size_t begin = job_n * size_t(k) / t;
    size_t end = job_n * size_t(k + 1) / t;
    if (begin >= end) return;
    try {
      job(begin, end);
    } catch (...) {
      std::lock_guard<std::mutex> lock(mu);
      if (!error) error = std::current_exception();
    }
  }

  void spawn(int n_threads) {
    total_threads = clamp_threads(n_threads);
    for (int i = 1; i < total_threads; ++i)
      workers.emplace_back([this, i] { worker_loop(i); });
  }

  void join_all() {
    {
      std::lock_guard<std::mutex> lock(mu);
      stopping = true;
    }
    cv_start.notify_all();
    for (auto& w : workers) w.join();
    workers.clear();
    stopping = false;
  }
};

ThreadPool::ThreadPool(int n_threads) : impl_(new Impl) { impl_->spawn(n_threads); }

ThreadPool::~ThreadPool() {
  impl_->join_all();
  delete impl_;
}

int ThreadPool::size() const { return impl_->total_threads; }

void ThreadPool::resize(int n_threads) {
  impl_->join_all();
  impl_->spawn(n_threads);
}

void ThreadPool::parallel_for(size_t n, const std::function<void(size_t, size_t)>& fn) {
  if (n == 0) return;
  if (t_inside_worker || impl_->total_threads == 1 || n == 1) {
    fn(0, n);  // inline: nested or single-threaded
    return;
  }
  {
    std::lock_guard<std::mutex> lock(impl_->mu);
    impl_->fn = &fn;
    impl_->n = n;
    impl_->error = nullptr;
    impl_->pending = int(impl_->workers.size());
    ++impl_->generation;
  }
  impl_->cv_start.notify_all();
  impl_->run_chunk(fn, n, 0);  // caller takes chunk 0
  {
    std::unique_lock<std::mutex> lock(impl_->mu);
    impl_->cv_done.wait(lock, [&] { return impl_->pending == 0; });
    if (impl_->error) {
      auto err = impl_->error;
      impl_->error = nullptr;
      std::rethrow_exception(err);
    }
  }
}

void ThreadPool::for_each(size_t n, const std::function<void(size_t)>& fn) {
  parallel_for(n, [&fn](size_t begin, size_t end) {
    for (size_t i = begin; i < end; ++i) fn(i);
  });
}

ThreadPool& ThreadPool::global() {
  static ThreadPool pool([] {
    if (const char* env = std::getenv("MARL_NUM_THREADS")) {
      int n = std::atoi(env);
      if (n >= 1) return n;
    }
    int hw = int(std::thread::hardware_concurrency());
    if (hw < 1) hw = 1;
    return hw > 16 ? 16 : hw;
  }());
  return pool;
}

}  // namespace marl
