#pragma once

#include <cstddef>
#include <functional>

namespace gmfkit {

/// Worker cap used by every parallel loop in the library. Defaults to 1.
void set_num_threads(int threads);
int num_threads();

/// Runs body(begin_chunk, end_chunk) over [begin, end) split into contiguous
/// chunks, one per worker. Chunks are disjoint, so bodies that only write to
/// their own indices give results independent of the thread count.
void parallel_for(std::ptrdiff_t begin, std::ptrdiff_t end,
                  const std::function<void(std::ptrdiff_t, std::ptrdiff_t)>& body,
                  std::ptrdiff_t min_chunk = 64);

}  // namespace gmfkit
