#include "gmfkit/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "gmfkit/errors.hpp"

namespace gmfkit {

namespace {
std::atomic<int> g_threads{1};
}

void set_num_threads(int threads) {
  if (threads < 1) throw ConfigError("thread count must be at least 1");
  g_threads.store(threads);
}

int num_threads() { return g_threads.load(); }

void parallel_for(std::ptrdiff_t begin, std::ptrdiff_t end,
                  const std::function<void(std::ptrdiff_t, std::ptrdiff_t)>& body,
                  std::ptrdiff_t min_chunk) {
  const std::ptrdiff_t count = end - begin;
  if (count <= 0) return;
  const std::ptrdiff_t max_workers = std::max<std::ptrdiff_t>(1, count / std::max<std::ptrdiff_t>(1, min_chunk));
  const std::ptrdiff_t workers = std::min<std::ptrdiff_t>(num_threads(), max_workers);
  if (workers <= 1) {
    body(begin, end);
    return;
  }

  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers - 1));
  const std::ptrdiff_t chunk = (count + workers - 1) / workers;
  auto run = [&](std::ptrdiff_t lo, std::ptrdiff_t hi) {
    try {
      body(lo, hi);
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  };
  for (std::ptrdiff_t w = 1; w < workers; ++w) {
    const std::ptrdiff_t lo = begin + w * chunk;
    const std::ptrdiff_t hi = std::min(end, lo + chunk);
    if (lo < hi) pool.emplace_back(run, lo, hi);
  }
  run(begin, std::min(end, begin + chunk));
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace gmfkit
