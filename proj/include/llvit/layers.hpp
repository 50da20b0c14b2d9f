#pragma once

#include <memory>
#include <string>
#include <vector>

#include "llvit/ops.hpp"
#include "llvit/rng.hpp"
#include "llvit/tensor.hpp"

namespace llvit {

// Trainable tensor plus its gradient. `decayable` marks tensors subject to
// decoupled weight decay (dense weights only; norms, biases, LUT latents and
// encoded values are exempt). `lr_scale` is a per-parameter learning-rate
// multiplier (used for the LUT latent tables).
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
    bool decayable = true;
    float lr_scale = 1.0f;

    Parameter() = default;
    Parameter(std::string n, Tensor v, bool decay = true, float scale = 1.0f)
        : name(std::move(n)), value(std::move(v)),
          grad(Tensor::zeros(value.shape(), Dtype::f32)),
          decayable(decay), lr_scale(scale) {}
};

class Linear {
   public:
    Linear() = default;
    Linear(const std::string& name, int64_t in, int64_t out, bool bias, Rng& rng);

    Tensor forward(const Tensor& x);        // [R,in] -> [R,out]
    Tensor backward(const Tensor& dout);    // accumulates grads, returns dx

    std::vector<Parameter*> params();
    Parameter& weight() { return w_; }
    const Parameter& weight() const { return w_; }
    const Parameter& bias() const { return b_; }
    bool has_bias() const { return has_bias_; }

   private:
    Parameter w_;  // [in,out]
    Parameter b_;
    bool has_bias_ = false;
    Tensor cached_x_;
};

class LayerNormLayer {
   public:
    LayerNormLayer() = default;
    LayerNormLayer(const std::string& name, int64_t dim, float eps = 1e-6f);

    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dout);

    std::vector<Parameter*> params();
    const Parameter& gamma() const { return gamma_; }
    const Parameter& beta() const { return beta_; }

   private:
    Parameter gamma_, beta_;
    float eps_ = 1e-6f;
    Tensor cached_x_;
    LayerNormStats stats_;
};

// Multi-head self-attention over one or more sequences. The input holds
// `batch` samples of `tokens` rows each, flattened to [batch*tokens, D];
// attention never crosses sample boundaries.
class MhaLayer {
   public:
    MhaLayer() = default;
    MhaLayer(const std::string& name, int64_t dim, int heads, Rng& rng);

    Tensor forward(const Tensor& x, int64_t batch, int64_t tokens);
    Tensor backward(const Tensor& dout);

    std::vector<Parameter*> params();
    int heads() const { return heads_; }

    // weight and forward-cache views for the integer-quantization builder
    const Parameter& wq() const { return wq_; }
    const Parameter& wk() const { return wk_; }
    const Parameter& wv() const { return wv_; }
    const Parameter& wo() const { return wo_; }
    const Parameter& bq() const { return bq_; }
    const Parameter& bk() const { return bk_; }
    const Parameter& bv() const { return bv_; }
    const Parameter& bo() const { return bo_; }
    const Tensor& cached_q() const { return q_; }
    const Tensor& cached_k() const { return k_; }
    const Tensor& cached_v() const { return v_; }
    const Tensor& cached_ctx() const { return ctx_; }

   private:
    Parameter wq_, wk_, wv_, wo_;  // [D,D] each
    Parameter bq_, bk_, bv_, bo_;
    int heads_ = 0;
    int64_t dim_ = 0;
    // forward caches
    int64_t batch_ = 0, tokens_ = 0;
    Tensor cached_x_, q_, k_, v_, probs_, ctx_;
};

// Softmax + cross-entropy fused; returns mean loss and writes dlogits.
float softmax_xent(const Tensor& logits, const std::vector<int32_t>& labels, Tensor& dlogits);

// Stateless single-input attention helper matching the four-matrix contract
// (no biases); used by tests and small experiments.
Tensor mha_forward(const Tensor& z, const Tensor& wq, const Tensor& wk, const Tensor& wv,
                   const Tensor& wo, int heads);

}  // namespace llvit
