#include "ctxmri/parallel.hpp"

#include <omp.h>

#include <algorithm>
#include <cstdlib>

namespace ctxmri {

int harness_thread_cap() {
  if (const char* env = std::getenv("CONTEXTRECON_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return std::max(1, omp_get_max_threads());
}

bool use_parallel_kernels() { return std::getenv("CONTEXTRECON_SERIAL") == nullptr; }

}  // namespace ctxmri
