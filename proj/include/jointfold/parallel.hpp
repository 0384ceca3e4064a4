#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace jointfold {

/// Resolves a worker count: explicit request, then JOINTFOLD_THREADS, then hardware.
inline int resolve_threads(int requested = 0) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("JOINTFOLD_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (const std::exception&) {
    }
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Runs body(i) for i in [0, n) over contiguous static chunks.
///
/// Every index is processed by exactly one worker and bodies must only write
/// to index-owned storage, so results never depend on the thread count.
template <class Body>
void parallel_for(std::ptrdiff_t n, int threads, Body&& body) {
  if (n <= 0) return;
  const int workers =
      static_cast<int>(std::min<std::ptrdiff_t>(resolve_threads(threads), n));
  if (workers <= 1) {
    for (std::ptrdiff_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::jthread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  const std::ptrdiff_t chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const std::ptrdiff_t begin = w * chunk;
    const std::ptrdiff_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&, begin, end] {
      try {
        for (std::ptrdiff_t i = begin; i < end; ++i) body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace jointfold
