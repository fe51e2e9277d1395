#pragma once

#include <cstdint>
#include <exception>
#include <mutex>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ranklab {

// Cap on worker threads used by parallel_for.  0 restores the hardware
// default.  Thread count never affects results: work items write only to
// their own slots and all reductions happen serially afterwards.
int max_threads();
void set_max_threads(int n);

// Runs fn(i) for every i in [0, n).  Items must be independent.  With the
// thread cap at 1 this is a plain serial loop (the reference path tests and
// the benchmark compare against).  An exception thrown by any item is
// captured and rethrown after the loop (OpenMP must not see it escape);
// remaining items still run.
template <class F>
void parallel_for(int64_t n, F&& fn) {
  const int threads = max_threads();
#ifdef _OPENMP
  if (threads > 1 && n > 1) {
    std::exception_ptr error;
    std::mutex error_mutex;
#pragma omp parallel for schedule(static) num_threads(threads)
    for (int64_t i = 0; i < n; ++i) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
    if (error) std::rethrow_exception(error);
    return;
  }
#endif
  (void)threads;
  for (int64_t i = 0; i < n; ++i) fn(i);
}

}  // namespace ranklab
