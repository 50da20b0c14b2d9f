#include "llvit/layers.hpp"

#include <cmath>
#include <cstring>
#include <utility>

#include "llvit/errors.hpp"

namespace llvit {

namespace {

Tensor init_weight(int64_t in, int64_t out, Rng& rng) {
    Tensor w = Tensor::zeros({in, out}, Dtype::f32);
    float* p = w.f32();
    for (int64_t i = 0; i < w.numel(); ++i) p[i] = rng.trunc_normal(0.0f, 0.02f);
    return w;
}

}  // namespace

Linear::Linear(const std::string& name, int64_t in, int64_t out, bool bias, Rng& rng)
    : w_(name + ".w", init_weight(in, out, rng), true), has_bias_(bias) {
    if (bias) {
        b_ = Parameter(name + ".b", Tensor::zeros({out}, Dtype::f32), false);
    }
}

Tensor Linear::forward(const Tensor& x) {
    cached_x_ = x;
    Tensor y = matmul(x, w_.value);
    if (has_bias_) add_bias_rows(y, b_.value);
    return y;
}

Tensor Linear::backward(const Tensor& dout) {
    Tensor dw = matmul_tn(cached_x_, dout);
    add_inplace(w_.grad, dw);
    if (has_bias_) {
        const int64_t d = dout.dim(1), rows = dout.dim(0);
        float* pb = b_.grad.f32();
        const float* pd = dout.f32();
#pragma omp parallel for schedule(static)
        for (int64_t j = 0; j < d; ++j) {
            float acc = 0.0f;
            for (int64_t r = 0; r < rows; ++r) acc += pd[r * d + j];
            pb[j] += acc;
        }
    }
    return matmul_nt(dout, w_.value);
}

std::vector<Parameter*> Linear::params() {
    std::vector<Parameter*> out{&w_};
    if (has_bias_) out.push_back(&b_);
    return out;
}

LayerNormLayer::LayerNormLayer(const std::string& name, int64_t dim, float eps)
    : gamma_(name + ".gamma", Tensor::full({dim}, 1.0f), false),
      beta_(name + ".beta", Tensor::zeros({dim}, Dtype::f32), false),
      eps_(eps) {}

Tensor LayerNormLayer::forward(const Tensor& x) {
    cached_x_ = x;
    return layernorm_forward(x, gamma_.value, beta_.value, eps_, &stats_);
}

Tensor LayerNormLayer::backward(const Tensor& dout) {
    Tensor dx;
    layernorm_backward(cached_x_, gamma_.value, stats_, dout, dx, gamma_.grad, beta_.grad);
    return dx;
}

std::vector<Parameter*> LayerNormLayer::params() { return {&gamma_, &beta_}; }

MhaLayer::MhaLayer(const std::string& name, int64_t dim, int heads, Rng& rng)
    : wq_(name + ".wq", init_weight(dim, dim, rng), true),
      wk_(name + ".wk", init_weight(dim, dim, rng), true),
      wv_(name + ".wv", init_weight(dim, dim, rng), true),
      wo_(name + ".wo", init_weight(dim, dim, rng), true),
      bq_(name + ".bq", Tensor::zeros({dim}, Dtype::f32), false),
      bk_(name + ".bk", Tensor::zeros({dim}, Dtype::f32), false),
      bv_(name + ".bv", Tensor::zeros({dim}, Dtype::f32), false),
      bo_(name + ".bo", Tensor::zeros({dim}, Dtype::f32), false),
      heads_(heads), dim_(dim) {
    if (dim % heads != 0) throw ConfigError("attention: dim must be divisible by heads");
}

Tensor MhaLayer::forward(const Tensor& x, int64_t batch, int64_t tokens) {
    if (x.dim(0) != batch * tokens || x.dim(1) != dim_) {
        throw DimensionError("attention: input must be [batch*tokens, dim]");
    }
    cached_x_ = x;
    batch_ = batch;
    tokens_ = tokens;

    q_ = matmul(x, wq_.value);
    add_bias_rows(q_, bq_.value);
    k_ = matmul(x, wk_.value);
    add_bias_rows(k_, bk_.value);
    v_ = matmul(x, wv_.value);
    add_bias_rows(v_, bv_.value);

    const int64_t dh = dim_ / heads_;
    const float scale = 1.0f / std::sqrt(static_cast<float>(dh));
    const int64_t pairs = batch * heads_;
    probs_ = Tensor::zeros({pairs, tokens, tokens}, Dtype::f32);
    ctx_ = Tensor::zeros({batch * tokens, dim_}, Dtype::f32);

    const float* pq = q_.f32();
    const float* pk = k_.f32();
    const float* pv = v_.f32();
    float* pp = probs_.f32();
    float* pc = ctx_.f32();

#pragma omp parallel for schedule(static)
    for (int64_t pair = 0; pair < pairs; ++pair) {
        const int64_t b = pair / heads_;
        const int64_t h = pair % heads_;
        const int64_t col0 = h * dh;
        float* prob = pp + pair * tokens_ * tokens_;
        for (int64_t t = 0; t < tokens_; ++t) {
            const float* qrow = pq + (b * tokens_ + t) * dim_ + col0;
            float* srow = prob + t * tokens_;
            float mx = -1e30f;
            for (int64_t u = 0; u < tokens_; ++u) {
                const float* krow = pk + (b * tokens_ + u) * dim_ + col0;
                float acc = 0.0f;
                for (int64_t c = 0; c < dh; ++c) acc += qrow[c] * krow[c];
                srow[u] = acc * scale;
                mx = std::max(mx, srow[u]);
            }
            float sum = 0.0f;
            for (int64_t u = 0; u < tokens_; ++u) {
                srow[u] = std::exp(srow[u] - mx);
                sum += srow[u];
            }
            const float inv = 1.0f / sum;
            for (int64_t u = 0; u < tokens_; ++u) srow[u] *= inv;
            float* crow = pc + (b * tokens_ + t) * dim_ + col0;
            for (int64_t u = 0; u < tokens_; ++u) {
                const float p = srow[u];
                const float* vrow = pv + (b * tokens_ + u) * dim_ + col0;
                for (int64_t c = 0; c < dh; ++c) crow[c] += p * vrow[c];
            }
        }
    }

    Tensor out = matmul(ctx_, wo_.value);
    add_bias_rows(out, bo_.value);
    return out;
}

Tensor MhaLayer::backward(const Tensor& dout) {
    const int64_t dh = dim_ / heads_;
    const float scale = 1.0f / std::sqrt(static_cast<float>(dh));
    const int64_t rows = batch_ * tokens_;

    // output projection
    add_inplace(wo_.grad, matmul_tn(ctx_, dout));
    {
        float* pb = bo_.grad.f32();
        const float* pd = dout.f32();
#pragma omp parallel for schedule(static)
        for (int64_t j = 0; j < dim_; ++j) {
            float acc = 0.0f;
            for (int64_t r = 0; r < rows; ++r) acc += pd[r * dim_ + j];
            pb[j] += acc;
        }
    }
    Tensor dctx = matmul_nt(dout, wo_.value);

    Tensor dq = Tensor::zeros({rows, dim_}, Dtype::f32);
    Tensor dk = Tensor::zeros({rows, dim_}, Dtype::f32);
    Tensor dv = Tensor::zeros({rows, dim_}, Dtype::f32);

    const float* pq = q_.f32();
    const float* pk = k_.f32();
    const float* pv = v_.f32();
    const float* pp = probs_.f32();
    const float* pdc = dctx.f32();
    float* pdq = dq.f32();
    float* pdk = dk.f32();
    float* pdv = dv.f32();
    const int64_t pairs = batch_ * heads_;

#pragma omp parallel for schedule(static)
    for (int64_t pair = 0; pair < pairs; ++pair) {
        const int64_t b = pair / heads_;
        const int64_t h = pair % heads_;
        const int64_t col0 = h * dh;
        const float* prob = pp + pair * tokens_ * tokens_;
        std::vector<float> dprob(static_cast<size_t>(tokens_ * tokens_), 0.0f);
        // dP and dV
        for (int64_t t = 0; t < tokens_; ++t) {
            const float* dcrow = pdc + (b * tokens_ + t) * dim_ + col0;
            for (int64_t u = 0; u < tokens_; ++u) {
                const float* vrow = pv + (b * tokens_ + u) * dim_ + col0;
                float acc = 0.0f;
                for (int64_t c = 0; c < dh; ++c) acc += dcrow[c] * vrow[c];
                dprob[static_cast<size_t>(t * tokens_ + u)] = acc;
            }
        }
        for (int64_t u = 0; u < tokens_; ++u) {
            float* dvrow = pdv + (b * tokens_ + u) * dim_ + col0;
            for (int64_t t = 0; t < tokens_; ++t) {
                const float p = prob[t * tokens_ + u];
                const float* dcrow = pdc + (b * tokens_ + t) * dim_ + col0;
                for (int64_t c = 0; c < dh; ++c) dvrow[c] += p * dcrow[c];
            }
        }
        // dS = P * (dP - rowsum(dP*P)), then dQ, dK
        for (int64_t t = 0; t < tokens_; ++t) {
            const float* prow = prob + t * tokens_;
            float* dprow = dprob.data() + t * tokens_;
            float dot = 0.0f;
            for (int64_t u = 0; u < tokens_; ++u) dot += dprow[u] * prow[u];
            for (int64_t u = 0; u < tokens_; ++u) {
                dprow[u] = prow[u] * (dprow[u] - dot) * scale;
            }
        }
        for (int64_t t = 0; t < tokens_; ++t) {
            const float* dsrow = dprob.data() + t * tokens_;
            float* dqrow = pdq + (b * tokens_ + t) * dim_ + col0;
            for (int64_t u = 0; u < tokens_; ++u) {
                const float ds = dsrow[u];
                const float* krow = pk + (b * tokens_ + u) * dim_ + col0;
                for (int64_t c = 0; c < dh; ++c) dqrow[c] += ds * krow[c];
            }
        }
        for (int64_t u = 0; u < tokens_; ++u) {
            float* dkrow = pdk + (b * tokens_ + u) * dim_ + col0;
            for (int64_t t = 0; t < tokens_; ++t) {
                const float ds = dprob[static_cast<size_t>(t * tokens_ + u)];
                const float* qrow = pq + (b * tokens_ + t) * dim_ + col0;
                for (int64_t c = 0; c < dh; ++c) dkrow[c] += ds * qrow[c];
            }
        }
    }

    add_inplace(wq_.grad, matmul_tn(cached_x_, dq));
    add_inplace(wk_.grad, matmul_tn(cached_x_, dk));
    add_inplace(wv_.grad, matmul_tn(cached_x_, dv));
    for (auto [bias, dgrad] : {std::pair{&bq_, &dq}, {&bk_, &dk}, {&bv_, &dv}}) {
        float* pb = bias->grad.f32();
        const float* pd = dgrad->f32();
#pragma omp parallel for schedule(static)
        for (int64_t j = 0; j < dim_; ++j) {
            float acc = 0.0f;
            for (int64_t r = 0; r < rows; ++r) acc += pd[r * dim_ + j];
            pb[j] += acc;
        }
    }

    Tensor dx = matmul_nt(dq, wq_.value);
    add_inplace(dx, matmul_nt(dk, wk_.value));
    add_inplace(dx, matmul_nt(dv, wv_.value));
    return dx;
}

std::vector<Parameter*> MhaLayer::params() {
    return {&wq_, &bq_, &wk_, &bk_, &wv_, &bv_, &wo_, &bo_};
}

float softmax_xent(const Tensor& logits, const std::vector<int32_t>& labels, Tensor& dlogits) {
    const int64_t b = logits.dim(0), c = logits.dim(1);
    if (static_cast<int64_t>(labels.size()) != b) {
        throw DimensionError("cross-entropy: label count mismatch");
    }
    Tensor probs = softmax_rows(logits);
    dlogits = probs;
    float loss = 0.0f;
    const float* pp = probs.f32();
    float* pd = dlogits.f32();
    for (int64_t i = 0; i < b; ++i) {
        const int32_t y = labels[static_cast<size_t>(i)];
        loss -= std::log(std::max(pp[i * c + y], 1e-30f));
        pd[i * c + y] -= 1.0f;
    }
    const float inv_b = 1.0f / static_cast<float>(b);
    scale_inplace(dlogits, inv_b);
    return loss * inv_b;
}

Tensor mha_forward(const Tensor& z, const Tensor& wq, const Tensor& wk, const Tensor& wv,
                   const Tensor& wo, int heads) {
    const int64_t d = z.dim(1);
    Rng rng(0);
    MhaLayer layer("mha", d, heads, rng);
    auto ps = layer.params();
    std::memcpy(ps[0]->value.raw(), wq.raw(), wq.nbytes());
    std::memcpy(ps[2]->value.raw(), wk.raw(), wk.nbytes());
    std::memcpy(ps[4]->value.raw(), wv.raw(), wv.nbytes());
    std::memcpy(ps[6]->value.raw(), wo.raw(), wo.nbytes());
    ps[1]->value.zero();
    ps[3]->value.zero();
    ps[5]->value.zero();
    ps[7]->value.zero();
    return layer.forward(z, 1, z.dim(0));
}

}  // namespace llvit
