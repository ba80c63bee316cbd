#pragma once

#include <cstddef>
#include <cstdint>

namespace isfm {

/// Worker count used by the kernels. Results never depend on it: every output
/// element is produced by exactly one worker with a fixed reduction order.
void set_num_threads(int n);
int num_threads();

/// Runs body(i) for i in [0, n). Iterations must write disjoint outputs.
template <class Body>
void parallel_for(std::int64_t n, Body&& body) {
#if defined(ISFM_HAVE_OPENMP)
#pragma omp parallel for schedule(static) num_threads(num_threads()) if (n > 1)
    for (std::int64_t i = 0; i < n; ++i) {
        body(i);
    }
#else
    for (std::int64_t i = 0; i < n; ++i) {
        body(i);
    }
#endif
}

}  // namespace isfm
