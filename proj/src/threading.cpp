#include "llvit/threading.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace llvit {

namespace {
int g_threads = 0;  // 0 = library default
}

void set_num_threads(int n) {
    g_threads = n;
#ifdef _OPENMP
    if (n > 0) {
        omp_set_num_threads(n);
    }
#endif
}

int num_threads() {
#ifdef _OPENMP
    return g_threads > 0 ? g_threads : omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace llvit
