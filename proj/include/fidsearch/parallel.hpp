#pragma once

#include <cstddef>
#include <functional>

namespace fidsearch {

// Worker count used by parallel_for. 0 restores the default
// (FIDSEARCH_THREADS if set, else hardware concurrency).
void set_thread_count(std::size_t n);
std::size_t thread_count();

// Runs body(begin, end) over a static partition of [0, n). Each index is
// visited exactly once; chunk boundaries depend only on n and the thread
// count, so callers that write disjoint outputs are deterministic.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace fidsearch
