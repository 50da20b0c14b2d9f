#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "llvit/channel_mixer.hpp"
#include "llvit/layers.hpp"

namespace llvit {

struct ModelConfig {
    int image_size = 28;
    int patch_size = 4;
    int channels = 1;
    int64_t dim = 64;
    int heads = 4;
    int depth = 4;
    int num_classes = 10;
    MixerConfig mixer;
    uint64_t seed = 42;

    int64_t patches_per_side() const { return image_size / patch_size; }
    int64_t num_patches() const { return patches_per_side() * patches_per_side(); }
    int64_t tokens() const { return num_patches() + 1; }  // + class token
    int64_t patch_dim() const {
        return static_cast<int64_t>(patch_size) * patch_size * channels;
    }
    void validate() const;  // throws ConfigError
};

// One transformer encoder: pre-norm attention with residual, then the
// channel mixer (which owns its norm and residual internally).
class EncoderBlock {
   public:
    EncoderBlock(const std::string& name, const ModelConfig& cfg, int block_index, Rng& rng);

    Tensor forward(const Tensor& x, int64_t batch);
    Tensor backward(const Tensor& dout);

    std::vector<Parameter*> params();
    ChannelMixer& mixer() { return mixer_; }
    MhaLayer& attention() { return mha_; }
    LayerNormLayer& norm1() { return ln1_; }

   private:
    int64_t tokens_ = 0;
    LayerNormLayer ln1_;
    MhaLayer mha_;
    ChannelMixer mixer_;
};

// Patch embedding + positional embedding + class token + encoder stack +
// final norm + class-token linear head.
class Model {
   public:
    explicit Model(const ModelConfig& cfg);

    // images: [B, H, W, C] f32 (already normalized); returns [B, classes].
    // When `first_nan_stage` is non-null, every stage output is scanned and
    // the first stage producing a non-finite value is reported there.
    Tensor forward(const Tensor& images, std::string* first_nan_stage = nullptr);
    void backward(const Tensor& dlogits);

    // Runs the thermometer calibration pass: embeds `images`, walks the
    // stack, and lets each lut mixer place its thresholds on its own input
    // activations. Returns total perturbed (degenerate) feature columns.
    int calibrate(const Tensor& images);
    bool needs_calibration() const;

    std::vector<Parameter*> params();
    const ModelConfig& config() const { return cfg_; }
    std::vector<std::unique_ptr<EncoderBlock>>& blocks() { return blocks_; }
    Linear& head() { return head_; }
    LayerNormLayer& final_norm() { return final_ln_; }
    Linear& patch_proj() { return patch_proj_; }
    const Parameter& pos_embedding() const { return pos_; }
    const Parameter& cls_token() const { return cls_; }

    // [B*N, D] token matrix for `images` (embedding only; used by the
    // integer path's calibration).
    Tensor embed(const Tensor& images);

   private:
    Tensor embed_forward(const Tensor& images);
    void embed_backward(const Tensor& dtokens);

    ModelConfig cfg_;
    Linear patch_proj_;
    Parameter pos_;  // [N, D]
    Parameter cls_;  // [D]
    std::vector<std::unique_ptr<EncoderBlock>> blocks_;
    LayerNormLayer final_ln_;
    Linear head_;
    // caches
    Tensor cached_patches_;  // [B*num_patches, patch_dim]
    int64_t cached_batch_ = 0;
};

}  // namespace llvit
