#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace vpfp {

/// How a computation may use threads. In deterministic mode every reduction
/// runs in a fixed order, so results are bit-identical for any thread count.
struct Exec {
  unsigned threads = 1;
  bool deterministic = true;

  static Exec from_environment() {
    Exec e;
    if (const char* s = std::getenv("VPFP_THREADS")) {
      const long v = std::strtol(s, nullptr, 10);
      if (v > 0) e.threads = static_cast<unsigned>(v);
    }
    return e;
  }
};

/// Calls body(begin, end) on contiguous, statically assigned chunks of
/// [0, n). The chunk boundaries depend only on n and the thread count.
template <class Body>
void parallel_for(std::size_t n, unsigned threads, Body&& body) {
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(threads, n));
  if (workers <= 1) {
    if (n > 0) body(std::size_t{0}, n);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&, begin, end] {
      try {
        body(begin, end);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace vpfp
