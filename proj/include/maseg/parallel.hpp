#pragma once

#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace maseg {

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

/// Static range split over `threads` workers. Each worker gets one
/// contiguous [begin, end) chunk, so output written to per-index slots is
/// identical for any thread count.
template <typename Fn>
void parallel_for(std::int64_t n, int threads, Fn&& body) {
  threads = resolve_threads(threads);
  if (n <= 0) return;
  if (threads <= 1 || n == 1) {
    body(0, std::int64_t{0}, n);
    return;
  }
  const int used = static_cast<int>(std::min<std::int64_t>(threads, n));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(used));
  const std::int64_t chunk = (n + used - 1) / used;
  for (int w = 0; w < used; ++w) {
    const std::int64_t begin = w * chunk;
    const std::int64_t end = std::min<std::int64_t>(begin + chunk, n);
    if (begin >= end) break;
    pool.emplace_back([&body, w, begin, end] { body(w, begin, end); });
  }
  for (auto& t : pool) t.join();
}

}  // namespace maseg
