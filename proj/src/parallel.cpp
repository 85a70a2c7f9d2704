// Copyright (C) 2026 rerender-pi authors
// SPDX-License-Identifier: Apache-2.0
#include "rerender/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <vector>

namespace rerender {

namespace {

int default_thread_count() {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (n <= 0) n = 1;
  n = std::min(n, 16);
  if (const char* env = std::getenv("RERENDER_PI_THREADS")) {
    int cap = std::atoi(env);
    if (cap > 0) n = std::min(n, cap);
  }
  return n;
}

std::atomic<int> g_forced_threads{0};

// Minimal persistent pool. Workers pick fixed-size chunks identified by a
// chunk index, so the mapping from index range to worker is irrelevant for
// determinism (each range is disjoint and internally ordered).
class Pool {
 public:
  explicit Pool(int workers) : workers_(workers) {
    threads_.reserve(workers_);
    for (int i = 0; i < workers_; ++i) {
      threads_.emplace_back([this] { worker_loop(); });
    }
  }

  ~Pool() {
    {
      std::lock_guard<std::mutex> lk(m_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& t : threads_) t.join();
  }

  int size() const { return workers_; }

  void run(int64_t n, int64_t chunk, const std::function<void(int64_t, int64_t)>& fn) {
    const int64_t nchunks = (n + chunk - 1) / chunk;
    {
      std::lock_guard<std::mutex> lk(m_);
      fn_ = &fn;
      n_ = n;
      chunk_ = chunk;
      next_chunk_.store(0, std::memory_order_relaxed);
      pending_ = nchunks;
      generation_++;
    }
    cv_.notify_all();
    // The caller participates too.
    drain();
    std::unique_lock<std::mutex> lk(m_);
    done_cv_.wait(lk, [this] { return pending_ == 0; });
    fn_ = nullptr;
  }

 private:
  void drain() {
    while (true) {
      int64_t c = next_chunk_.fetch_add(1, std::memory_order_relaxed);
      int64_t begin = c * chunk_;
      if (begin >= n_) break;
      int64_t end = std::min(n_, begin + chunk_);
      (*fn_)(begin, end);
      std::lock_guard<std::mutex> lk(m_);
      if (--pending_ == 0) done_cv_.notify_all();
    }
  }

  void worker_loop() {
    uint64_t seen = 0;
    while (true) {
      std::unique_lock<std::mutex> lk(m_);
      cv_.wait(lk, [&] { return stop_ || generation_ != seen; });
      if (stop_) return;
      seen = generation_;
      if (!fn_) continue;
      lk.unlock();
      drain();
    }
  }

  int workers_;
  std::vector<std::thread> threads_;
  std::mutex m_;
  std::condition_variable cv_, done_cv_;
  const std::function<void(int64_t, int64_t)>* fn_ = nullptr;
  int64_t n_ = 0, chunk_ = 1, pending_ = 0;
  std::atomic<int64_t> next_chunk_{0};
  uint64_t generation_ = 0;
  bool stop_ = false;
};

Pool& pool() {
  static Pool p(std::max(0, default_thread_count() - 1));
  return p;
}

}  // namespace

int thread_count() {
  int forced = g_forced_threads.load(std::memory_order_relaxed);
  if (forced > 0) return forced;
  return default_thread_count();
}

void set_thread_count(int count) { g_forced_threads.store(count, std::memory_order_relaxed); }

void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn,
                  int64_t grain) {
  if (n <= 0) return;
  const int threads = thread_count();
  if (threads <= 1 || n < grain || n < 2) {
    fn(0, n);
    return;
  }
  // A few chunks per worker for load balance; chunk boundaries do not affect
  // results because indices are independent.
  int64_t chunk = std::max<int64_t>(1, n / (static_cast<int64_t>(threads) * 4));
  pool().run(n, chunk, fn);
}

}  // namespace rerender
