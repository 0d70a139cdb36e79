#pragma once

#include <cstddef>
#include <functional>

namespace squeezelab {

/// Worker count: `requested` if nonzero, else hardware concurrency; always
/// capped by the SQUEEZELAB_THREADS environment variable when it is set.
std::size_t resolve_threads(std::size_t requested = 0);

/// Calls fn(i) for i in [0, n) on up to `threads` workers. Each index is
/// visited exactly once; callers write results into per-index slots so the
/// outcome does not depend on scheduling. The first exception is rethrown.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace squeezelab
