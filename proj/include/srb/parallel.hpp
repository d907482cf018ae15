#pragma once

#include <cstddef>
#include <functional>

namespace srb {

/// Worker count: hardware concurrency, capped by SRB_LAB_THREADS when set.
unsigned worker_count();

/// Runs body(i) for i in [0, n) over contiguous blocks. Callers write results
/// by index, so output never depends on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace srb
