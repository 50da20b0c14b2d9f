#pragma once

#include "llvit/tensor.hpp"

namespace llvit::ref {

// Serial reference kernels. Plain triple loops in m,p,k order with no
// threading pragmas; kept independent of the OpenMP kernels so the test
// suite and the benchmark can compare the two paths.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor layernorm_forward(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps);
Tensor gelu(const Tensor& x);
Tensor softmax_rows(const Tensor& x);

}  // namespace llvit::ref
