#pragma once

#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace cfa {

// Every data-parallel kernel in this project takes an Execution argument.
// The serial path is the reference implementation; the parallel path must
// produce bitwise-identical results (work is partitioned per index and
// reductions run in fixed index order afterwards). Tests assert equality,
// tools/bench compares wall time.
enum class Execution { serial, parallel };

template <class F>
void parallel_for(std::size_t n, Execution exec, F&& fn) {
#ifdef _OPENMP
    if (exec == Execution::parallel) {
        const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(static)
        for (long long i = 0; i < count; ++i) fn(static_cast<std::size_t>(i));
        return;
    }
#else
    (void)exec;
#endif
    for (std::size_t i = 0; i < n; ++i) fn(i);
}

inline int hardware_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace cfa
