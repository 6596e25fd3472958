#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace bsvie::detail {

// Splits [0, n) into contiguous chunks and runs fn(begin, end) on each.
// Chunk boundaries depend only on n and `chunk`, never on the thread count,
// so any per-chunk output is identical between serial and parallel runs.
template <typename Fn>
void parallel_chunks(std::ptrdiff_t n, std::ptrdiff_t chunk, Fn&& fn) {
  if (n <= 0) return;
  chunk = std::max<std::ptrdiff_t>(chunk, 1);
  const std::ptrdiff_t chunks = (n + chunk - 1) / chunk;
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const auto workers = static_cast<std::ptrdiff_t>(std::min<std::ptrdiff_t>(hw, chunks));
  auto run = [&](std::ptrdiff_t worker) {
    for (std::ptrdiff_t c = worker; c < chunks; c += workers) {
      fn(c * chunk, std::min(n, (c + 1) * chunk));
    }
  };
  if (workers <= 1) {
    run(0);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers - 1));
  for (std::ptrdiff_t w = 1; w < workers; ++w) pool.emplace_back(run, w);
  run(0);
  for (auto& t : pool) t.join();
}

}  // namespace bsvie::detail
