#include "llvit/ref_ops.hpp"

#include <cmath>

namespace llvit::ref {

Tensor matmul(const Tensor& a, const Tensor& b) {
    const int64_t m = a.dim(0), k = a.dim(1), p = b.dim(1);
    if (b.dim(0) != k) throw DimensionError("ref::matmul: inner dimensions disagree");
    if (a.dtype() == Dtype::i8 && b.dtype() == Dtype::i8) {
        Tensor c = Tensor::zeros({m, p}, Dtype::i32);
        for (int64_t i = 0; i < m; ++i)
            for (int64_t j = 0; j < p; ++j) {
                int32_t acc = 0;
                for (int64_t l = 0; l < k; ++l)
                    acc += static_cast<int32_t>(a.i8()[i * k + l]) *
                           static_cast<int32_t>(b.i8()[l * p + j]);
                c.i32()[i * p + j] = acc;
            }
        return c;
    }
    Tensor c = Tensor::zeros({m, p}, Dtype::f32);
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < p; ++j) {
            float acc = 0.0f;
            for (int64_t l = 0; l < k; ++l)
                acc += a.f32()[i * k + l] * b.f32()[l * p + j];
            c.f32()[i * p + j] = acc;
        }
    return c;
}

Tensor layernorm_forward(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps) {
    const int64_t d = x.dim(x.ndim() - 1);
    const int64_t rows = x.numel() / d;
    Tensor out = Tensor::zeros(x.shape(), Dtype::f32);
    for (int64_t r = 0; r < rows; ++r) {
        float m = 0.0f;
        for (int64_t j = 0; j < d; ++j) m += x.f32()[r * d + j];
        m /= static_cast<float>(d);
        float v = 0.0f;
        for (int64_t j = 0; j < d; ++j) {
            float c = x.f32()[r * d + j] - m;
            v += c * c;
        }
        v /= static_cast<float>(d);
        const float rs = 1.0f / std::sqrt(v + eps);
        for (int64_t j = 0; j < d; ++j) {
            out.f32()[r * d + j] =
                (x.f32()[r * d + j] - m) * rs * gamma.f32()[j] + beta.f32()[j];
        }
    }
    return out;
}

Tensor gelu(const Tensor& x) {
    Tensor out = Tensor::zeros(x.shape(), Dtype::f32);
    for (int64_t i = 0; i < x.numel(); ++i) {
        const float v = x.f32()[i];
        const float u = 0.7978845608028654f * (v + 0.044715f * v * v * v);
        out.f32()[i] = 0.5f * v * (1.0f + std::tanh(u));
    }
    return out;
}

Tensor softmax_rows(const Tensor& x) {
    const int64_t d = x.dim(x.ndim() - 1);
    const int64_t rows = x.numel() / d;
    Tensor out = Tensor::zeros(x.shape(), Dtype::f32);
    for (int64_t r = 0; r < rows; ++r) {
        float mx = x.f32()[r * d];
        for (int64_t j = 1; j < d; ++j) mx = std::max(mx, x.f32()[r * d + j]);
        float sum = 0.0f;
        for (int64_t j = 0; j < d; ++j) {
            out.f32()[r * d + j] = std::exp(x.f32()[r * d + j] - mx);
            sum += out.f32()[r * d + j];
        }
        for (int64_t j = 0; j < d; ++j) out.f32()[r * d + j] /= sum;
    }
    return out;
}

}  // namespace llvit::ref
