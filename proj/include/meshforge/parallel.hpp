#pragma once

#include <cstddef>
#include <functional>

namespace meshforge {

/// Worker count: MESHFORGE_WORKERS if set and positive, otherwise the
/// hardware concurrency (at least 1).
std::size_t default_workers();

/// Runs body(begin, end) over [0, n) split into chunks of `grain` indices.
/// Chunk boundaries depend only on n and grain, never on the worker count,
/// so per-chunk work is reproducible at any parallelism. workers == 0 means
/// default_workers(). Exceptions from body are rethrown on the caller.
void parallel_for(std::size_t n, std::size_t grain,
                  const std::function<void(std::size_t, std::size_t)>& body,
                  std::size_t workers = 0);

}  // namespace meshforge
