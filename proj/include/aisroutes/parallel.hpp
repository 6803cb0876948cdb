// Bounded fan-out over independent tasks.
#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace aisroutes {

/// Number of workers to use when the caller asks for "all cores".
inline int default_workers() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Runs `task(i)` for every i in [0, n) on up to `workers` threads.
///
/// Tasks are claimed dynamically, so completion order is arbitrary; callers
/// write results into slot i of a pre-sized vector to keep output
/// independent of scheduling. The first exception thrown by any task is
/// rethrown on the calling thread after all workers have joined.
template <class Task>
void parallel_for(int workers, std::size_t n, Task&& task) {
  if (n == 0) return;
  const std::size_t nthreads = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, workers)), n);
  if (nthreads == 1) {
    for (std::size_t i = 0; i < n; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    while (!failed.load(std::memory_order_relaxed)) {
      const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= n) return;
      try {
        task(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        failed = true;
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(nthreads - 1);
  for (std::size_t t = 1; t < nthreads; ++t) pool.emplace_back(worker);
  worker();
  pool.clear();
  if (error) std::rethrow_exception(error);
}

}  // namespace aisroutes
