#pragma once

#include <cstddef>
#include <functional>

namespace otblab::harness {

/// Worker count: OTBLAB_THREADS if set to a positive integer, otherwise the
/// hardware concurrency (at least 1).
std::size_t thread_budget();

/// Calls body(i) for i in [0, n) on up to thread_budget() threads. Each index
/// runs exactly once; callers write results into per-index slots so the
/// output does not depend on scheduling. The exception of the lowest failing index is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace otblab::harness
