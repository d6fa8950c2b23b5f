#pragma once

#include <algorithm>
#include <cstdint>
#include <thread>
#include <vector>

namespace adathresh::detail {

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs fn(worker, begin, end) on contiguous chunks of [0, total). Caller is
// responsible for deterministic merging of per-worker state.
template <typename Fn>
void parallel_chunks(std::int64_t total, int threads, Fn&& fn) {
  const int t = std::min<std::int64_t>(resolve_threads(threads),
                                       std::max<std::int64_t>(total, 1));
  if (t <= 1) {
    fn(0, std::int64_t{0}, total);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(t);
  const std::int64_t chunk = (total + t - 1) / t;
  for (int w = 0; w < t; ++w) {
    const std::int64_t begin = std::min<std::int64_t>(w * chunk, total);
    const std::int64_t end = std::min<std::int64_t>(begin + chunk, total);
    pool.emplace_back([&fn, w, begin, end] { fn(w, begin, end); });
  }
  for (auto& th : pool) th.join();
}

}  // namespace adathresh::detail
