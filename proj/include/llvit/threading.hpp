#pragma once

namespace llvit {

// Global thread-count control for the OpenMP kernels. All parallel loops
// partition work by output element with a fixed inner summation order, so
// results are bitwise identical for any thread count; set_num_threads(1)
// gives the strict single-threaded mode.
void set_num_threads(int n);
int num_threads();

}  // namespace llvit
