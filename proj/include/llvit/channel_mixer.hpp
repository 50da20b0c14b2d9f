#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "llvit/cond_sum.hpp"
#include "llvit/layers.hpp"
#include "llvit/lut_layer.hpp"
#include "llvit/thermometer.hpp"

namespace llvit {

enum class MixerKind { mlp, lut };

MixerKind mixer_kind_from_name(const std::string& name);
std::string mixer_kind_name(MixerKind kind);

struct MixerConfig {
    MixerKind kind = MixerKind::lut;
    // lut kind
    int therm_bits = 8;                     // thermometer levels per feature
    std::vector<int64_t> widths = {768, 192};  // LUT neurons per layer
    int fan_in = 6;
    float latent_lr_scale = 10.0f;
    bool local_diff = false;                // ablation: local finite difference
    QuantGranularity quant_granularity = QuantGranularity::per_layer;
    // mlp kind
    int hidden_ratio = 4;

    void validate(int64_t dim) const;  // throws ConfigError
};

// Per-encoder parameter/footprint arithmetic for one mixer (biases excluded
// from the dense weight count; they are reported separately by the cost
// report).
struct MixerParamCount {
    int64_t dense_weights = 0;    // mlp: 2 * ratio * D^2
    int64_t dense_biases = 0;     // mlp: (ratio + 1) * D
    int64_t latent_entries = 0;   // lut: trainable reals == deployed bits
    int64_t encoded_values = 0;   // lut: D * J_last
    int64_t thresholds = 0;       // lut: D * b
    int64_t norm_params = 0;      // 2 * D (the mixer-side layernorm)
};

MixerParamCount mixer_param_count(const MixerConfig& cfg, int64_t dim);

// The feature-transforming half of an encoder block, with its layernorm and
// residual add folded in: forward(z) = z + core(norm(z)). The lut core is
// thermometer -> LUT layers -> conditional summation; the mlp core is
// GELU-gated two-layer dense per the standard ViT recipe. Gradients reach
// the lut core's tables through the straight-through relaxation; the
// thermometer blocks any gradient from flowing further back along that
// branch (the residual identity carries it instead).
class ChannelMixer {
   public:
    ChannelMixer(const std::string& name, const MixerConfig& cfg, int64_t dim,
                 uint64_t map_seed, Rng& rng);

    Tensor forward(const Tensor& z);   // [N, D] -> [N, D]
    Tensor backward(const Tensor& dout);

    // One-time threshold placement from the mixer's own normalized view of
    // `sample` (lut kind only). Returns the number of degenerate feature
    // columns that needed perturbing.
    int calibrate(const Tensor& sample);
    bool needs_calibration() const;

    std::vector<Parameter*> params();

    const MixerConfig& config() const { return cfg_; }
    MixerKind kind() const { return cfg_.kind; }
    int64_t dim() const { return dim_; }
    LayerNormLayer& norm() { return norm_; }
    const ThermometerCodec& codec() const { return codec_; }
    ThermometerCodec& codec() { return codec_; }
    std::vector<LutLayer>& lut_layers() { return luts_; }
    const std::vector<LutLayer>& lut_layers() const { return luts_; }
    CondSumLayer& cond_sum() { return condsum_; }
    const CondSumLayer& cond_sum() const { return condsum_; }
    Linear& fc1() { return fc1_; }
    Linear& fc2() { return fc2_; }

   private:
    MixerConfig cfg_;
    int64_t dim_ = 0;
    LayerNormLayer norm_;
    // lut kind
    ThermometerCodec codec_;
    std::vector<LutLayer> luts_;
    CondSumLayer condsum_;
    // mlp kind
    Linear fc1_, fc2_;
    Tensor cached_h1_;  // pre-GELU activations
};

}  // namespace llvit
