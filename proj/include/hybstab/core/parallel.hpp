#pragma once

#include <cstddef>
#include <functional>

namespace hybstab {

/// Process-wide worker count for path-parallel loops. 0 means hardware concurrency.
void set_worker_count(unsigned workers);
unsigned worker_count();

/// Runs body(i) for i in [0, n). Iterations must be independent; each writes only
/// its own output slot so results do not depend on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace hybstab
