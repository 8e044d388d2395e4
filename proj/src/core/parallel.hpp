#pragma once

#include <cstddef>
#include <functional>

namespace tdoa {

/// Worker count: TDOA_FORGE_THREADS when set and positive, else the
/// hardware concurrency.
unsigned worker_count();

/// Runs body(k) for k in [0, n). Each index runs exactly once; callers write
/// into per-index slots so the reduction order never depends on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace tdoa
