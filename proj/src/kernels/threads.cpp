#include "condflow/kernels/threads.hpp"

#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace condflow::kernels {
namespace {

int env_threads() {
    const char* raw = std::getenv("CONDFLOW_THREADS");
    if (raw == nullptr || *raw == '\0') return 0;
    try {
        const int n = std::stoi(raw);
        return n > 0 ? n : 0;
    } catch (...) {
        return 0;
    }
}

}  // namespace

int max_threads() {
    const int env = env_threads();
#ifdef _OPENMP
    const int rt = omp_get_max_threads();
    return env > 0 && env < rt ? env : rt;
#else
    (void)env;
    return 1;
#endif
}

void apply_thread_env() {
#ifdef _OPENMP
    if (const int env = env_threads(); env > 0) omp_set_num_threads(env);
#endif
}

bool openmp_enabled() {
#ifdef _OPENMP
    return true;
#else
    return false;
#endif
}

}  // namespace condflow::kernels
