#pragma once

#include "llvit/tensor.hpp"

namespace llvit {

// Dense kernels. All parallel loops split work by output row/element and keep
// the inner accumulation order fixed, so results do not depend on the thread
// count. Serial counterparts used as test oracles live in ref_ops.hpp.

// c[m,p] = sum_k a[m,k] * b[k,p]; f32 inputs give f32, i8 inputs give i32.
Tensor matmul(const Tensor& a, const Tensor& b);

// a[M,K] * b[P,K]^T -> [M,P]
Tensor matmul_nt(const Tensor& a, const Tensor& b);

// a[K,M]^T * b[K,P] -> [M,P]
Tensor matmul_tn(const Tensor& a, const Tensor& b);

struct LayerNormStats {
    Tensor mean;  // [R]
    Tensor rstd;  // [R]
};

// Normalizes the last axis with population variance.
Tensor layernorm_forward(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                         float eps, LayerNormStats* stats = nullptr);

void layernorm_backward(const Tensor& x, const Tensor& gamma, const LayerNormStats& stats,
                        const Tensor& dout, Tensor& dx, Tensor& dgamma, Tensor& dbeta);

// tanh-approximation GELU: 0.5*x*(1 + tanh(sqrt(2/pi)*(x + 0.044715*x^3)))
Tensor gelu(const Tensor& x);
void gelu_backward(const Tensor& x, const Tensor& dout, Tensor& dx);

// Row-wise stable softmax over the last axis.
Tensor softmax_rows(const Tensor& x);

void add_inplace(Tensor& a, const Tensor& b);
void add_bias_rows(Tensor& x, const Tensor& bias);  // x[R,D] += bias[D] per row
void scale_inplace(Tensor& a, float s);

}  // namespace llvit
