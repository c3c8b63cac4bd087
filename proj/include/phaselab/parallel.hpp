#pragma once

#include <cstddef>
#include <functional>

namespace phaselab {

/// Worker count: PHASELAB_THREADS if set, else hardware concurrency (min 1).
std::size_t worker_count();

/// Runs fn(i) for i in [0, n) across worker_count() threads. Each index is
/// visited exactly once; callers write results to pre-assigned slots so the
/// outcome does not depend on scheduling. The first exception is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace phaselab
