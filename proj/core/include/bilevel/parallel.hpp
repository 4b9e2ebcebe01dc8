#pragma once

#include <atomic>
#include <functional>
#include <thread>
#include <vector>

namespace bilevel {

/// Runs body(0..count-1) on up to `workers` threads (<=1: inline). Assumes
/// bodies touch disjoint state; callers aggregate afterwards so output order
/// does not depend on scheduling.
inline void parallel_for(int count, int workers, const std::function<void(int)>& body) {
  if (workers <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  const int nw = std::min(workers, count);
  pool.reserve(static_cast<size_t>(nw));
  for (int w = 0; w < nw; ++w)
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) body(i);
    });
  for (auto& th : pool) th.join();
}

}  // namespace bilevel
