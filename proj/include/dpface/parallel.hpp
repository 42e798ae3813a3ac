#pragma once

#include <cstddef>

namespace dpface {

/// Worker count used by all parallel loops; 0 selects the hardware default.
void set_thread_count(int threads);
int thread_count();

/// Static-schedule parallel loop over [begin, end). Each index must write only
/// its own outputs, so results do not depend on the thread count. The body
/// must not throw.
template <class Body>
void parallel_for(long begin, long end, Body&& body)
{
#pragma omp parallel for schedule(static) num_threads(thread_count())
    for (long i = begin; i < end; ++i)
        body(i);
}

} // namespace dpface
