#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace dynrec {

// Process-wide worker count for slice-level parallelism. Work items are
// always partitioned the same way, so results do not depend on the setting;
// reductions stay sequential for the same reason.
inline int &thread_count_ref() {
  static int n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  return n;
}
inline void set_thread_count(int n) { thread_count_ref() = std::max(1, n); }
inline int thread_count() { return thread_count_ref(); }

template <typename Fn>
void parallel_for(std::int64_t n, Fn &&fn) {
  const int workers = static_cast<int>(std::min<std::int64_t>(thread_count(), n));
  if (workers <= 1) {
    for (std::int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&fn, w, workers, n] {
      for (std::int64_t i = w; i < n; i += workers) fn(i);
    });
  }
  for (auto &th : pool) th.join();
}

} // namespace dynrec
