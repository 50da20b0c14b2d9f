#include "llvit/ops.hpp"

#include <cmath>

namespace llvit {

namespace {

void check_2d(const Tensor& t, const char* what) {
    if (t.ndim() != 2) throw DimensionError(std::string(what) + ": expected 2-d tensor");
}

constexpr float kGeluC = 0.7978845608028654f;  // sqrt(2/pi)
constexpr float kGeluA = 0.044715f;

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    check_2d(a, "matmul lhs");
    check_2d(b, "matmul rhs");
    const int64_t m = a.dim(0), k = a.dim(1), p = b.dim(1);
    if (b.dim(0) != k) throw DimensionError("matmul: inner dimensions disagree");

    if (a.dtype() == Dtype::f32 && b.dtype() == Dtype::f32) {
        Tensor c = Tensor::zeros({m, p}, Dtype::f32);
        const float* pa = a.f32();
        const float* pb = b.f32();
        float* pc = c.f32();
#pragma omp parallel for schedule(static)
        for (int64_t i = 0; i < m; ++i) {
            float* crow = pc + i * p;
            for (int64_t l = 0; l < k; ++l) {
                const float av = pa[i * k + l];
                const float* brow = pb + l * p;
                for (int64_t j = 0; j < p; ++j) {
                    crow[j] += av * brow[j];
                }
            }
        }
        return c;
    }
    if (a.dtype() == Dtype::i8 && b.dtype() == Dtype::i8) {
        Tensor c = Tensor::zeros({m, p}, Dtype::i32);
        const int8_t* pa = a.i8();
        const int8_t* pb = b.i8();
        int32_t* pc = c.i32();
#pragma omp parallel for schedule(static)
        for (int64_t i = 0; i < m; ++i) {
            int32_t* crow = pc + i * p;
            for (int64_t l = 0; l < k; ++l) {
                const int32_t av = pa[i * k + l];
                const int8_t* brow = pb + l * p;
                for (int64_t j = 0; j < p; ++j) {
                    crow[j] += av * static_cast<int32_t>(brow[j]);
                }
            }
        }
        return c;
    }
    throw DimensionError("matmul: unsupported dtype combination");
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    check_2d(a, "matmul_nt lhs");
    check_2d(b, "matmul_nt rhs");
    const int64_t m = a.dim(0), k = a.dim(1), p = b.dim(0);
    if (b.dim(1) != k) throw DimensionError("matmul_nt: inner dimensions disagree");
    Tensor c = Tensor::zeros({m, p}, Dtype::f32);
    const float* pa = a.f32();
    const float* pb = b.f32();
    float* pc = c.f32();
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < m; ++i) {
        for (int64_t j = 0; j < p; ++j) {
            float acc = 0.0f;
            const float* arow = pa + i * k;
            const float* brow = pb + j * k;
            for (int64_t l = 0; l < k; ++l) acc += arow[l] * brow[l];
            pc[i * p + j] = acc;
        }
    }
    return c;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
    check_2d(a, "matmul_tn lhs");
    check_2d(b, "matmul_tn rhs");
    const int64_t k = a.dim(0), m = a.dim(1), p = b.dim(1);
    if (b.dim(0) != k) throw DimensionError("matmul_tn: inner dimensions disagree");
    Tensor c = Tensor::zeros({m, p}, Dtype::f32);
    const float* pa = a.f32();
    const float* pb = b.f32();
    float* pc = c.f32();
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < m; ++i) {
        float* crow = pc + i * p;
        for (int64_t l = 0; l < k; ++l) {
            const float av = pa[l * m + i];
            const float* brow = pb + l * p;
            for (int64_t j = 0; j < p; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

Tensor layernorm_forward(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                         float eps, LayerNormStats* stats) {
    const int64_t d = x.dim(x.ndim() - 1);
    const int64_t rows = x.numel() / d;
    if (gamma.numel() != d || beta.numel() != d) {
        throw DimensionError("layernorm: gamma/beta length must match last axis");
    }
    if (d < 1) throw DimensionError("layernorm: empty last axis");
    Tensor out = Tensor::zeros(x.shape(), Dtype::f32);
    Tensor mean = Tensor::zeros({rows}, Dtype::f32);
    Tensor rstd = Tensor::zeros({rows}, Dtype::f32);
    const float* px = x.f32();
    const float* pg = gamma.f32();
    const float* pb = beta.f32();
    float* po = out.f32();
    float* pm = mean.f32();
    float* pr = rstd.f32();
#pragma omp parallel for schedule(static)
    for (int64_t r = 0; r < rows; ++r) {
        const float* row = px + r * d;
        float m = 0.0f;
        for (int64_t j = 0; j < d; ++j) m += row[j];
        m /= static_cast<float>(d);
        float v = 0.0f;
        for (int64_t j = 0; j < d; ++j) {
            const float c = row[j] - m;
            v += c * c;
        }
        v /= static_cast<float>(d);
        const float rs = 1.0f / std::sqrt(v + eps);
        pm[r] = m;
        pr[r] = rs;
        float* orow = po + r * d;
        for (int64_t j = 0; j < d; ++j) {
            orow[j] = (row[j] - m) * rs * pg[j] + pb[j];
        }
    }
    if (stats) {
        stats->mean = std::move(mean);
        stats->rstd = std::move(rstd);
    }
    return out;
}

void layernorm_backward(const Tensor& x, const Tensor& gamma, const LayerNormStats& stats,
                        const Tensor& dout, Tensor& dx, Tensor& dgamma, Tensor& dbeta) {
    const int64_t d = x.dim(x.ndim() - 1);
    const int64_t rows = x.numel() / d;
    dx = Tensor::zeros(x.shape(), Dtype::f32);
    const float* px = x.f32();
    const float* pg = gamma.f32();
    const float* pm = stats.mean.f32();
    const float* pr = stats.rstd.f32();
    const float* pd = dout.f32();
    float* pdx = dx.f32();
#pragma omp parallel for schedule(static)
    for (int64_t r = 0; r < rows; ++r) {
        const float* row = px + r * d;
        const float* drow = pd + r * d;
        float* dxrow = pdx + r * d;
        const float m = pm[r], rs = pr[r];
        float sum_dy = 0.0f, sum_dyx = 0.0f;
        for (int64_t j = 0; j < d; ++j) {
            const float xhat = (row[j] - m) * rs;
            const float dy = drow[j] * pg[j];
            sum_dy += dy;
            sum_dyx += dy * xhat;
        }
        const float inv_d = 1.0f / static_cast<float>(d);
        for (int64_t j = 0; j < d; ++j) {
            const float xhat = (row[j] - m) * rs;
            const float dy = drow[j] * pg[j];
            dxrow[j] = rs * (dy - inv_d * sum_dy - xhat * inv_d * sum_dyx);
        }
    }
    // dgamma/dbeta: parallel over features, serial over rows (deterministic)
    float* pdg = dgamma.f32();
    float* pdb = dbeta.f32();
#pragma omp parallel for schedule(static)
    for (int64_t j = 0; j < d; ++j) {
        float g = 0.0f, b = 0.0f;
        for (int64_t r = 0; r < rows; ++r) {
            const float xhat = (px[r * d + j] - pm[r]) * pr[r];
            g += pd[r * d + j] * xhat;
            b += pd[r * d + j];
        }
        pdg[j] += g;
        pdb[j] += b;
    }
}

Tensor gelu(const Tensor& x) {
    Tensor out = Tensor::zeros(x.shape(), Dtype::f32);
    const float* px = x.f32();
    float* po = out.f32();
    const int64_t n = x.numel();
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) {
        const float v = px[i];
        const float u = kGeluC * (v + kGeluA * v * v * v);
        po[i] = 0.5f * v * (1.0f + std::tanh(u));
    }
    return out;
}

void gelu_backward(const Tensor& x, const Tensor& dout, Tensor& dx) {
    dx = Tensor::zeros(x.shape(), Dtype::f32);
    const float* px = x.f32();
    const float* pd = dout.f32();
    float* pdx = dx.f32();
    const int64_t n = x.numel();
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) {
        const float v = px[i];
        const float u = kGeluC * (v + kGeluA * v * v * v);
        const float t = std::tanh(u);
        const float sech2 = 1.0f - t * t;
        const float du = kGeluC * (1.0f + 3.0f * kGeluA * v * v);
        pdx[i] = pd[i] * (0.5f * (1.0f + t) + 0.5f * v * sech2 * du);
    }
}

Tensor softmax_rows(const Tensor& x) {
    const int64_t d = x.dim(x.ndim() - 1);
    const int64_t rows = x.numel() / d;
    Tensor out = Tensor::zeros(x.shape(), Dtype::f32);
    const float* px = x.f32();
    float* po = out.f32();
#pragma omp parallel for schedule(static)
    for (int64_t r = 0; r < rows; ++r) {
        const float* row = px + r * d;
        float* orow = po + r * d;
        float mx = row[0];
        for (int64_t j = 1; j < d; ++j) mx = std::max(mx, row[j]);
        float sum = 0.0f;
        for (int64_t j = 0; j < d; ++j) {
            orow[j] = std::exp(row[j] - mx);
            sum += orow[j];
        }
        const float inv = 1.0f / sum;
        for (int64_t j = 0; j < d; ++j) orow[j] *= inv;
    }
    return out;
}

void add_inplace(Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    float* pa = a.f32();
    const float* pb = b.f32();
    const int64_t n = a.numel();
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) pa[i] += pb[i];
}

void add_bias_rows(Tensor& x, const Tensor& bias) {
    const int64_t d = x.dim(x.ndim() - 1);
    if (bias.numel() != d) throw DimensionError("add_bias_rows: bias length mismatch");
    const int64_t rows = x.numel() / d;
    float* px = x.f32();
    const float* pb = bias.f32();
#pragma omp parallel for schedule(static)
    for (int64_t r = 0; r < rows; ++r) {
        float* row = px + r * d;
        for (int64_t j = 0; j < d; ++j) row[j] += pb[j];
    }
}

void scale_inplace(Tensor& a, float s) {
    float* pa = a.f32();
    const int64_t n = a.numel();
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) pa[i] *= s;
}

}  // namespace llvit
