#include "llvit/model.hpp"

#include <cmath>
#include <cstring>

#include "llvit/errors.hpp"
#include "llvit/ops.hpp"

namespace llvit {

void ModelConfig::validate() const {
    if (image_size < 1 || patch_size < 1 || channels < 1) {
        throw ConfigError("model: image/patch/channel sizes must be positive");
    }
    if (image_size % patch_size != 0) {
        throw ConfigError("model: image size must be divisible by patch size");
    }
    if (dim < 1 || depth < 1 || heads < 1 || num_classes < 2) {
        throw ConfigError("model: dim/depth/heads/classes out of range");
    }
    if (dim % heads != 0) throw ConfigError("model: dim must be divisible by heads");
    mixer.validate(dim);
}

EncoderBlock::EncoderBlock(const std::string& name, const ModelConfig& cfg, int block_index,
                           Rng& rng)
    : tokens_(cfg.tokens()),
      ln1_(name + ".norm1", cfg.dim),
      mha_(name + ".attn", cfg.dim, cfg.heads, rng),
      mixer_(name + ".mixer", cfg.mixer, cfg.dim,
             Rng::derive(cfg.seed, 1000 + static_cast<uint64_t>(block_index)), rng) {}

Tensor EncoderBlock::forward(const Tensor& x, int64_t batch) {
    Tensor h = ln1_.forward(x);
    Tensor attn = mha_.forward(h, batch, tokens_);
    add_inplace(attn, x);
    return mixer_.forward(attn);
}

Tensor EncoderBlock::backward(const Tensor& dout) {
    Tensor dattn = mixer_.backward(dout);
    Tensor dh = mha_.backward(dattn);
    Tensor dx = ln1_.backward(dh);
    add_inplace(dx, dattn);  // residual identity around attention
    return dx;
}

std::vector<Parameter*> EncoderBlock::params() {
    std::vector<Parameter*> out = ln1_.params();
    for (auto* p : mha_.params()) out.push_back(p);
    for (auto* p : mixer_.params()) out.push_back(p);
    return out;
}

Model::Model(const ModelConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(cfg_.seed);
    patch_proj_ = Linear("embed.proj", cfg_.patch_dim(), cfg_.dim, /*bias=*/true, rng);
    {
        Tensor pos = Tensor::zeros({cfg_.tokens(), cfg_.dim}, Dtype::f32);
        float* p = pos.f32();
        for (int64_t i = 0; i < pos.numel(); ++i) p[i] = rng.trunc_normal(0.0f, 0.02f);
        pos_ = Parameter("embed.pos", std::move(pos), /*decay=*/false);
    }
    {
        Tensor cls = Tensor::zeros({cfg_.dim}, Dtype::f32);
        float* p = cls.f32();
        for (int64_t i = 0; i < cls.numel(); ++i) p[i] = rng.trunc_normal(0.0f, 0.02f);
        cls_ = Parameter("embed.cls", std::move(cls), /*decay=*/false);
    }
    blocks_.reserve(static_cast<size_t>(cfg_.depth));
    for (int b = 0; b < cfg_.depth; ++b) {
        blocks_.push_back(
            std::make_unique<EncoderBlock>("block" + std::to_string(b), cfg_, b, rng));
    }
    final_ln_ = LayerNormLayer("final.norm", cfg_.dim);
    head_ = Linear("head", cfg_.dim, cfg_.num_classes, /*bias=*/true, rng);
}

Tensor Model::embed_forward(const Tensor& images) {
    if (images.ndim() != 4 || images.dim(1) != cfg_.image_size ||
        images.dim(2) != cfg_.image_size || images.dim(3) != cfg_.channels) {
        throw DimensionError("model: images must be [B, H, W, C] matching the config");
    }
    const int64_t batch = images.dim(0);
    const int64_t side = cfg_.patches_per_side();
    const int64_t np = cfg_.num_patches();
    const int64_t ps = cfg_.patch_size;
    const int64_t c = cfg_.channels;
    const int64_t pd = cfg_.patch_dim();
    const int64_t hw = cfg_.image_size;

    cached_patches_ = Tensor::zeros({batch * np, pd}, Dtype::f32);
    cached_batch_ = batch;
    float* pp = cached_patches_.f32();
    const float* ip = images.f32();
#pragma omp parallel for schedule(static)
    for (int64_t b = 0; b < batch; ++b) {
        for (int64_t py = 0; py < side; ++py) {
            for (int64_t px = 0; px < side; ++px) {
                float* dst = pp + ((b * np) + py * side + px) * pd;
                for (int64_t y = 0; y < ps; ++y) {
                    const float* src = ip + ((b * hw + py * ps + y) * hw + px * ps) * c;
                    for (int64_t x = 0; x < ps * c; ++x) dst[y * ps * c + x] = src[x];
                }
            }
        }
    }

    Tensor proj = patch_proj_.forward(cached_patches_);  // [B*np, D]
    const int64_t n = cfg_.tokens();
    const int64_t d = cfg_.dim;
    Tensor tokens = Tensor::zeros({batch * n, d}, Dtype::f32);
    float* tp = tokens.f32();
    const float* jp = proj.f32();
    const float* posp = pos_.value.f32();
    const float* clsp = cls_.value.f32();
#pragma omp parallel for schedule(static)
    for (int64_t b = 0; b < batch; ++b) {
        float* trow = tp + b * n * d;
        for (int64_t k = 0; k < d; ++k) trow[k] = clsp[k] + posp[k];
        for (int64_t t = 1; t < n; ++t) {
            const float* jrow = jp + (b * np + (t - 1)) * d;
            const float* prow = posp + t * d;
            float* out = trow + t * d;
            for (int64_t k = 0; k < d; ++k) out[k] = jrow[k] + prow[k];
        }
    }
    return tokens;
}

void Model::embed_backward(const Tensor& dtokens) {
    const int64_t batch = cached_batch_;
    const int64_t n = cfg_.tokens();
    const int64_t np = cfg_.num_patches();
    const int64_t d = cfg_.dim;
    const float* dt = dtokens.f32();

    float* dpos = pos_.grad.f32();
    float* dcls = cls_.grad.f32();
#pragma omp parallel for schedule(static)
    for (int64_t t = 0; t < n; ++t) {
        float* prow = dpos + t * d;
        for (int64_t b = 0; b < batch; ++b) {
            const float* drow = dt + (b * n + t) * d;
            for (int64_t k = 0; k < d; ++k) prow[k] += drow[k];
        }
    }
    for (int64_t b = 0; b < batch; ++b) {
        const float* drow = dt + b * n * d;
        for (int64_t k = 0; k < d; ++k) dcls[k] += drow[k];
    }

    Tensor dproj = Tensor::zeros({batch * np, d}, Dtype::f32);
    float* dp = dproj.f32();
#pragma omp parallel for schedule(static)
    for (int64_t b = 0; b < batch; ++b) {
        for (int64_t t = 1; t < n; ++t) {
            const float* src = dt + (b * n + t) * d;
            float* dst = dp + (b * np + (t - 1)) * d;
            for (int64_t k = 0; k < d; ++k) dst[k] = src[k];
        }
    }
    patch_proj_.backward(dproj);  // gradient stops at the pixels
}

Tensor Model::embed(const Tensor& images) { return embed_forward(images); }

namespace {

bool has_nonfinite(const Tensor& t) {
    const float* p = t.f32();
    for (int64_t i = 0; i < t.numel(); ++i) {
        if (!std::isfinite(p[i])) return true;
    }
    return false;
}

}  // namespace

Tensor Model::forward(const Tensor& images, std::string* first_nan_stage) {
    const auto check = [&](const Tensor& t, const std::string& stage) {
        if (first_nan_stage && first_nan_stage->empty() && has_nonfinite(t)) {
            *first_nan_stage = stage;
        }
    };
    if (first_nan_stage) first_nan_stage->clear();

    Tensor x = embed_forward(images);
    check(x, "embed");
    const int64_t batch = cached_batch_;
    for (size_t b = 0; b < blocks_.size(); ++b) {
        x = blocks_[b]->forward(x, batch);
        check(x, "block" + std::to_string(b));
    }
    x = final_ln_.forward(x);
    check(x, "final.norm");

    // class-token rows only
    const int64_t n = cfg_.tokens();
    const int64_t d = cfg_.dim;
    Tensor cls_rows = Tensor::zeros({batch, d}, Dtype::f32);
    float* cp = cls_rows.f32();
    const float* xp = x.f32();
#pragma omp parallel for schedule(static)
    for (int64_t b = 0; b < batch; ++b) {
        std::memcpy(cp + b * d, xp + b * n * d, static_cast<size_t>(d) * sizeof(float));
    }
    Tensor logits = head_.forward(cls_rows);
    check(logits, "head");
    return logits;
}

void Model::backward(const Tensor& dlogits) {
    const int64_t batch = cached_batch_;
    const int64_t n = cfg_.tokens();
    const int64_t d = cfg_.dim;

    Tensor dcls_rows = head_.backward(dlogits);  // [B, D]
    Tensor dx = Tensor::zeros({batch * n, d}, Dtype::f32);
    float* dxp = dx.f32();
    const float* dcp = dcls_rows.f32();
#pragma omp parallel for schedule(static)
    for (int64_t b = 0; b < batch; ++b) {
        std::memcpy(dxp + b * n * d, dcp + b * d, static_cast<size_t>(d) * sizeof(float));
    }
    dx = final_ln_.backward(dx);
    for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) {
        dx = (*it)->backward(dx);
    }
    embed_backward(dx);
}

bool Model::needs_calibration() const {
    for (const auto& b : blocks_) {
        if (b->mixer().needs_calibration()) return true;
    }
    return false;
}

int Model::calibrate(const Tensor& images) {
    int perturbed = 0;
    Tensor x = embed_forward(images);
    const int64_t batch = cached_batch_;
    for (auto& b : blocks_) {
        // reproduce the block's own pre-mixer activations, calibrate the
        // mixer on them, then continue through it
        Tensor h = b->norm1().forward(x);
        Tensor attn = b->attention().forward(h, batch, cfg_.tokens());
        add_inplace(attn, x);
        perturbed += b->mixer().calibrate(attn);
        x = b->mixer().forward(attn);
    }
    return perturbed;
}

std::vector<Parameter*> Model::params() {
    std::vector<Parameter*> out;
    for (auto* p : patch_proj_.params()) out.push_back(p);
    out.push_back(&pos_);
    out.push_back(&cls_);
    for (auto& b : blocks_) {
        for (auto* p : b->params()) out.push_back(p);
    }
    for (auto* p : final_ln_.params()) out.push_back(p);
    for (auto* p : head_.params()) out.push_back(p);
    return out;
}

}  // namespace llvit
