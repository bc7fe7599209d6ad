#include "core/threading.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace chartloc {

std::size_t default_thread_count() {
  if (const char* env = std::getenv("CHARTLOC_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<std::size_t>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

void parallel_for_chunked(std::size_t n, std::size_t chunk_size,
                          const std::function<void(std::size_t, std::size_t)>& fn,
                          std::size_t n_threads) {
  if (n == 0) return;
  if (chunk_size == 0) chunk_size = 1;
  if (n_threads == 0) n_threads = default_thread_count();

  const std::size_t n_chunks = (n + chunk_size - 1) / chunk_size;
  if (n_threads == 1 || n_chunks == 1) {
    for (std::size_t c = 0; c < n_chunks; ++c) {
      const std::size_t b = c * chunk_size;
      fn(b, std::min(n, b + chunk_size));
    }
    return;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto worker = [&]() {
    for (;;) {
      const std::size_t c = next.fetch_add(1, std::memory_order_relaxed);
      if (c >= n_chunks) return;
      const std::size_t b = c * chunk_size;
      try {
        fn(b, std::min(n, b + chunk_size));
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  std::vector<std::thread> pool;
  const std::size_t spawn = std::min(n_threads, n_chunks) - 1;
  pool.reserve(spawn);
  for (std::size_t t = 0; t < spawn; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace chartloc
