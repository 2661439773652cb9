#pragma once

#include <cstddef>
#include <functional>

namespace xalign {

// Parallelism cap: XALIGN_THREADS env var (>= 1) or hardware concurrency.
size_t max_threads();

// Runs body(i) for i in [begin, end) over at most max_threads() workers with
// contiguous index chunks. Deterministic as long as each index writes only
// its own slots. Nested calls run serially on the caller's thread, so
// coarse-grained loops (grid configs, forest trees) keep the workers.
void parallel_for(size_t begin, size_t end, const std::function<void(size_t)>& body);

}  // namespace xalign
