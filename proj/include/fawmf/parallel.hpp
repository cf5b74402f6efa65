#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace fawmf {

// Splits [0, count) into `workers` contiguous chunks and runs
// fn(begin, end, worker) on each. workers <= 1 runs inline on the caller's
// thread, which is the bit-exact reference path.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t workers, Fn&& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, count));
  if (workers == 1) {
    fn(std::size_t{0}, count, std::size_t{0});
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) {
    pool.emplace_back([&, w] { fn(w * count / workers, (w + 1) * count / workers, w); });
  }
  fn(std::size_t{0}, count / workers, std::size_t{0});
}

inline std::size_t effective_workers(std::size_t requested, std::size_t count) {
  return std::max<std::size_t>(1, std::min(requested, count));
}

}  // namespace fawmf
