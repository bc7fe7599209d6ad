#pragma once

#include <cstddef>
#include <functional>

namespace chartloc {

// Number of worker threads: CHARTLOC_THREADS env var if set, otherwise
// hardware concurrency.
std::size_t default_thread_count();

// Runs fn(begin, end) over [0, n) split into fixed-size chunks handed out to
// a small thread pool. Chunk boundaries depend only on n and chunk_size, so
// callers that write per-chunk (or per-index) results into preassigned slots
// get output independent of the worker count.
void parallel_for_chunked(std::size_t n, std::size_t chunk_size,
                          const std::function<void(std::size_t, std::size_t)>& fn,
                          std::size_t n_threads = 0);

}  // namespace chartloc
