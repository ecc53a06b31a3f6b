#pragma once

#include <cstddef>
#include <functional>

namespace aniso {

/// Worker cap: ANISO_THREADS if set, else hardware concurrency. Overridable for tests.
int worker_count();
void set_worker_count(int n);

/// Runs body(i) for i in [0, n) over a static partition. Callers write only to slot i,
/// so results never depend on the number of workers.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

} // namespace aniso
