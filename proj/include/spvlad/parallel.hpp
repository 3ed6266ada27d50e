#pragma once

#include <cstddef>
#include <functional>

namespace spvlad {

// Runs body(i) for i in [0, n) on up to `threads` workers (0 = hardware
// concurrency). Indices are split into contiguous blocks; each index runs
// exactly once. The first exception thrown by any worker is rethrown.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body);

unsigned resolve_threads(unsigned threads);

}  // namespace spvlad
