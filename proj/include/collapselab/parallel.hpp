#ifndef COLLAPSELAB_PARALLEL_HPP
#define COLLAPSELAB_PARALLEL_HPP

// Deterministic block-parallel map: work is split into a fixed number of
// blocks independent of the worker count; results land in block order and
// are reduced sequentially, so outputs are identical for any thread count.

#include <atomic>
#include <cstddef>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace collapselab {

inline int& worker_threads() {
  static int n = int(std::thread::hardware_concurrency());
  return n;
}

template <typename T, typename Fn>
std::vector<T> parallel_blocks(int n_blocks, Fn&& fn) {
  std::vector<T> results(n_blocks);
  int workers = std::max(1, std::min(worker_threads(), n_blocks));
  if (workers == 1) {
    for (int b = 0; b < n_blocks; ++b) results[b] = fn(b);
    return results;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex err_mutex;
  auto worker = [&]() {
    for (;;) {
      int b = next.fetch_add(1);
      if (b >= n_blocks) return;
      try {
        results[b] = fn(b);
      } catch (...) {
        std::lock_guard<std::mutex> lk(err_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
  return results;
}

inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  int workers = std::max(1, worker_threads());
  if (workers == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex err_mutex;
  auto worker = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lk(err_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace collapselab

#endif
