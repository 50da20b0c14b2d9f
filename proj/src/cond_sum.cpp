#include "llvit/cond_sum.hpp"

#include <algorithm>
#include <cmath>

#include "llvit/errors.hpp"
#include "llvit/ops.hpp"

namespace llvit {

QuantGranularity quant_granularity_from_name(const std::string& name) {
    if (name == "per-layer") return QuantGranularity::per_layer;
    if (name == "per-channel") return QuantGranularity::per_channel;
    throw ConfigError("unknown quantization granularity: " + name);
}

std::string quant_granularity_name(QuantGranularity g) {
    return g == QuantGranularity::per_layer ? "per-layer" : "per-channel";
}

CondSumLayer::CondSumLayer(const std::string& name, int64_t out_dim, int64_t in_bits, Rng& rng) {
    Tensor init = Tensor::zeros({out_dim, in_bits}, Dtype::f32);
    float* p = init.f32();
    for (int64_t i = 0; i < init.numel(); ++i) p[i] = rng.trunc_normal(0.0f, 0.02f);
    w_ = Parameter(name + ".w", std::move(init), /*decay=*/false);
}

Tensor CondSumLayer::forward(const BitTensor& x) {
    if (x.width() != in_bits()) throw DimensionError("cond-sum: input width mismatch");
    const int64_t rows = x.rows();
    const int64_t d = out_dim();
    const int64_t j_count = in_bits();
    Tensor y = Tensor::zeros({rows, d}, Dtype::f32);
    float* yp = y.f32();
    const float* w = w_.value.f32();

#pragma omp parallel for schedule(static)
    for (int64_t r = 0; r < rows; ++r) {
        // gather the fired bits once, then pure additions per channel
        std::vector<int32_t> fired;
        fired.reserve(static_cast<size_t>(j_count));
        for (int64_t j = 0; j < j_count; ++j) {
            if (x.get(r, j)) fired.push_back(static_cast<int32_t>(j));
        }
        float* yr = yp + r * d;
        for (int64_t i = 0; i < d; ++i) {
            const float* wr = w + i * j_count;
            float acc = 0.0f;
            for (int32_t j : fired) acc += wr[j];
            yr[i] = acc;
        }
    }
    cached_x_ = x;
    has_forward_ = true;
    return y;
}

Tensor CondSumLayer::backward(const Tensor& upstream) {
    if (!has_forward_) throw UsageError("cond-sum: backward before forward");
    const int64_t rows = cached_x_.rows();
    const int64_t d = out_dim();
    const int64_t j_count = in_bits();
    if (upstream.dim(0) != rows || upstream.dim(1) != d) {
        throw DimensionError("cond-sum: upstream gradient shape mismatch");
    }

    // materialize the cached bits as {0,1} reals; the grads are then plain
    // dense products
    Tensor xf = Tensor::zeros({rows, j_count}, Dtype::f32);
    float* xp = xf.f32();
#pragma omp parallel for schedule(static)
    for (int64_t r = 0; r < rows; ++r) {
        for (int64_t j = 0; j < j_count; ++j) {
            if (cached_x_.get(r, j)) xp[r * j_count + j] = 1.0f;
        }
    }

    add_inplace(w_.grad, matmul_tn(upstream, xf));  // [D, J]
    return matmul(upstream, w_.value);              // [N, J]
}

std::vector<Parameter*> CondSumLayer::params() { return {&w_}; }

namespace {

void quantize_span(const float* w, int64_t count, float maxabs, int bits, int8_t* out,
                   float* scale_out) {
    const int qmax = (1 << (bits - 1)) - 1;
    const int qmin = -(1 << (bits - 1));
    if (maxabs == 0.0f) {
        *scale_out = 1.0f;
        std::fill(out, out + count, int8_t{0});
        return;
    }
    const float s = maxabs / static_cast<float>(qmax);
    *scale_out = s;
    for (int64_t i = 0; i < count; ++i) {
        // nearbyint in the default rounding mode is round-half-to-even
        const float q = std::nearbyintf(w[i] / s);
        out[i] = static_cast<int8_t>(std::clamp(static_cast<int>(q), qmin, qmax));
    }
}

}  // namespace

QuantizedEncoded quantize_encoded(const Tensor& w, int bits, QuantGranularity granularity) {
    if (bits < 2 || bits > 8) throw ConfigError("encoded-value quantization: bits must be in [2,8]");
    if (w.ndim() != 2) throw DimensionError("encoded-value quantization: W must be [D,J]");
    const int64_t d = w.dim(0);
    const int64_t j_count = w.dim(1);
    QuantizedEncoded q;
    q.bits = bits;
    q.granularity = granularity;
    q.wq = Tensor::zeros({d, j_count}, Dtype::i8);
    const float* wp = w.f32();
    int8_t* qp = q.wq.i8();

    if (granularity == QuantGranularity::per_layer) {
        float maxabs = 0.0f;
        for (int64_t i = 0; i < w.numel(); ++i) maxabs = std::max(maxabs, std::abs(wp[i]));
        q.scales.resize(1);
        quantize_span(wp, w.numel(), maxabs, bits, qp, q.scales.data());
    } else {
        q.scales.resize(static_cast<size_t>(d));
        for (int64_t i = 0; i < d; ++i) {
            float maxabs = 0.0f;
            for (int64_t j = 0; j < j_count; ++j) {
                maxabs = std::max(maxabs, std::abs(wp[i * j_count + j]));
            }
            quantize_span(wp + i * j_count, j_count, maxabs, bits, qp + i * j_count,
                          &q.scales[static_cast<size_t>(i)]);
        }
    }
    return q;
}

Tensor dequantize_encoded(const QuantizedEncoded& q) {
    const int64_t d = q.wq.dim(0);
    const int64_t j_count = q.wq.dim(1);
    Tensor w = Tensor::zeros({d, j_count}, Dtype::f32);
    float* wp = w.f32();
    const int8_t* qp = q.wq.i8();
    for (int64_t i = 0; i < d; ++i) {
        const float s = q.scale_for(i);
        for (int64_t j = 0; j < j_count; ++j) {
            wp[i * j_count + j] = s * static_cast<float>(qp[i * j_count + j]);
        }
    }
    return w;
}

}  // namespace llvit
