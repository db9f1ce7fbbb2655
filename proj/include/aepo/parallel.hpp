#pragma once

#include <cstddef>
#include <functional>

namespace aepo::par {

// Worker cap, taken from AEPO_LAB_THREADS when set (minimum 1), otherwise
// hardware concurrency capped at 8.
int thread_cap();
void set_thread_cap(int cap);

// Runs fn(i) for i in [0, n) over statically chunked index ranges. Callers
// write results into pre-assigned slots and seed any randomness per index, so
// the outcome does not depend on the number of workers.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace aepo::par
