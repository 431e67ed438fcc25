#pragma once

#include <cstddef>
#include <functional>

namespace bsde {

/// Worker count: hardware concurrency, capped by BSDE_LAB_THREADS when set.
[[nodiscard]] std::size_t worker_count();

/// Runs body(begin, end) over [0, n) split into contiguous chunks, one per
/// worker. Chunk boundaries depend on the worker count; callers that need
/// schedule-independent results must not reduce across chunks.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace bsde
