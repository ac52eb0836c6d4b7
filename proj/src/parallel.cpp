#include "skewinfo/parallel.hpp"

#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace skewinfo {

int thread_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_thread_count(int n) {
  if (n < 1) return;
#ifdef _OPENMP
  omp_set_num_threads(n);
#endif
}

void apply_thread_env() {
  if (const char* env = std::getenv("SKEWINFO_THREADS")) {
    try {
      set_thread_count(std::stoi(env));
    } catch (...) {
      // malformed values leave the OpenMP default in place
    }
  }
}

}  // namespace skewinfo
