#pragma once

#include <cstddef>
#include <functional>

namespace contraction::detail {

/// Worker count from CONTRACTION_THREADS (default 1).
unsigned thread_count();

/// Runs body(i) for i in [0, n). Results must be written to slot i so that
/// the outcome does not depend on scheduling. Exceptions are rethrown for
/// the lowest failing index.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace contraction::detail
