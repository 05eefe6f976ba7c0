#pragma once

#include <functional>
#include <thread>
#include <vector>

namespace vsml {

// Static-partition parallel loop. Tasks write only to their own index, so
// results are identical for any worker count; callers reduce in index order.
inline void parallel_for(size_t n, int workers, const std::function<void(size_t)>& fn) {
  if (workers <= 0) {
    workers = static_cast<int>(std::thread::hardware_concurrency());
    if (workers <= 0) workers = 1;
  }
  const size_t w = std::min<size_t>(static_cast<size_t>(workers), n);
  if (w <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> threads;
  threads.reserve(w);
  for (size_t t = 0; t < w; ++t) {
    threads.emplace_back([&, t] {
      for (size_t i = t; i < n; i += w) fn(i);
    });
  }
  for (auto& th : threads) th.join();
}

}  // namespace vsml
