#pragma once

#include <cstddef>
#include <functional>

namespace eyedas {

// Worker count for internal parallelism: EYEDAS_THREADS if set to a positive
// integer, otherwise the hardware concurrency (at least 1).
std::size_t thread_count();

// Runs body(i) for i in [0, n) on up to thread_count() threads. Each index is
// visited exactly once; callers write results into index-addressed slots so the
// outcome does not depend on scheduling. The first exception thrown by any
// body is rethrown on the calling thread after all workers have joined.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace eyedas
