#pragma once

namespace condflow::kernels {

// Number of worker threads OpenMP regions may use. Honors CONDFLOW_THREADS
// when set to a positive integer, otherwise the OpenMP default.
int max_threads();

// Applies CONDFLOW_THREADS (if present) to the OpenMP runtime.
void apply_thread_env();

bool openmp_enabled();

}  // namespace condflow::kernels
