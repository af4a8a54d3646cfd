#pragma once

#include <functional>
#include <thread>
#include <vector>

#include "rtgp/numerics.hpp"

namespace rtgp {

// Runs fn(0..n-1) across up to `threads` workers. Callers keep determinism
// by writing results into per-index slots and owning one RNG stream per
// index.
inline void parallel_for(Index n, int threads,
                         const std::function<void(Index)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (Index i = 0; i < n; ++i) fn(i);
    return;
  }
  const int workers = std::min<int>(threads, static_cast<int>(n));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      for (Index i = w; i < n; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace rtgp
