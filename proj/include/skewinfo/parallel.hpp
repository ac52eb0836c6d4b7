#pragma once

namespace skewinfo {

/// Number of OpenMP threads used by the parallel kernels.
int thread_count();

/// Caps parallelism; values < 1 are ignored.
void set_thread_count(int n);

/// Applies SKEWINFO_THREADS from the environment if set.
void apply_thread_env();

}  // namespace skewinfo
