#pragma once

#include <cstdint>
#include <functional>

namespace picnet {

// Worker-thread cap from PICNET_THREADS (default 1, which keeps every
// run strictly sequential).
int worker_threads();

// Splits [0, n) into contiguous chunks, one per worker. Chunk bodies must
// write disjoint output ranges and perform no cross-chunk floating-point
// reduction; under that contract results are bit-identical to the
// sequential order regardless of the thread count.
void parallel_for(std::int64_t n,
                  const std::function<void(std::int64_t, std::int64_t)>& body);

}  // namespace picnet
