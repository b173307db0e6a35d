#pragma once

#include <cstdint>
#include <thread>
#include <vector>

namespace relpose {

inline int resolve_thread_count(int requested) {
  if (requested > 0) return requested;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Static chunked parallel loop. Each index is processed exactly once and
/// callers must only write to index-addressed slots, so results are
/// independent of the thread count.
template <typename Fn>
void parallel_for(std::int64_t n, int threads, Fn&& fn) {
  threads = resolve_thread_count(threads);
  if (n <= 0) return;
  if (threads <= 1 || n == 1) {
    for (std::int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::int64_t workers = std::min<std::int64_t>(threads, n);
  std::int64_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (std::int64_t w = 0; w < workers; ++w) {
    std::int64_t begin = w * chunk;
    std::int64_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([begin, end, &fn]() {
      for (std::int64_t i = begin; i < end; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace relpose
