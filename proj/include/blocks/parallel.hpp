#pragma once

#include <cstddef>
#include <functional>

namespace bw {

/// Worker count: hardware concurrency, capped by the BW_THREADS environment
/// variable when set.
int worker_count();

/// Runs body(begin, end) over [0, n) split into fixed-size chunks. Chunk
/// boundaries depend only on n and chunk, never on the worker count, so
/// per-chunk partial results can be reduced in chunk order deterministically.
void parallel_chunks(std::size_t n, std::size_t chunk,
                     const std::function<void(std::size_t chunk_index,
                                              std::size_t begin,
                                              std::size_t end)>& body);

inline std::size_t chunk_count(std::size_t n, std::size_t chunk) {
  return (n + chunk - 1) / chunk;
}

}  // namespace bw
