#pragma once

#include <cstddef>
#include <functional>

namespace proxyforge {

/// Worker count from PROXYFORGE_THREADS (0 or unset = hardware concurrency).
std::size_t thread_budget();

/// Runs fn(i) for i in [0, n). Work is split into contiguous chunks; fn must
/// only write state owned by index i. Falls back to a plain loop when the
/// budget is 1 or n is small.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace proxyforge
