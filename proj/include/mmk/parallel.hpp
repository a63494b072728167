#pragma once

#include <cstddef>
#include <functional>

namespace mmk {

// Worker count from MMK_THREADS (0 or unset = hardware concurrency).
unsigned worker_count();

// Runs body(begin, end) over contiguous chunks of [0, n). Chunk boundaries
// depend only on n and the worker count; callers that need results independent
// of the worker count must write to per-index slots and reduce afterwards.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace mmk
