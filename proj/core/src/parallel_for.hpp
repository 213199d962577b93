#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace gpwarp::detail {

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

// Runs fn(begin, end) over [0, count) split into fixed-size chunks. Chunk
// boundaries depend only on chunk_size and every output range is disjoint,
// so results do not depend on the number of worker threads.
template <class Fn>
void parallel_chunks(std::size_t count, std::size_t chunk_size, int threads, Fn&& fn) {
  if (count == 0) return;
  chunk_size = std::max<std::size_t>(1, chunk_size);
  const std::size_t nchunks = (count + chunk_size - 1) / chunk_size;
  const int nthreads =
      std::min<int>(resolve_threads(threads), static_cast<int>(std::min<std::size_t>(
                                                  nchunks, static_cast<std::size_t>(256))));
  auto run_chunk = [&](std::size_t c) {
    const std::size_t begin = c * chunk_size;
    const std::size_t end = std::min(count, begin + chunk_size);
    fn(begin, end);
  };
  if (nthreads <= 1) {
    for (std::size_t c = 0; c < nchunks; ++c) run_chunk(c);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(nthreads));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(nthreads));
  for (int t = 0; t < nthreads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t c = static_cast<std::size_t>(t); c < nchunks;
             c += static_cast<std::size_t>(nthreads))
          run_chunk(c);
      } catch (...) {
        errors[static_cast<std::size_t>(t)] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace gpwarp::detail
