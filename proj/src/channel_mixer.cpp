#include "llvit/channel_mixer.hpp"

#include "llvit/errors.hpp"
#include "llvit/ops.hpp"

namespace llvit {

MixerKind mixer_kind_from_name(const std::string& name) {
    if (name == "mlp") return MixerKind::mlp;
    if (name == "lut") return MixerKind::lut;
    throw ConfigError("unknown mixer kind: " + name);
}

std::string mixer_kind_name(MixerKind kind) { return kind == MixerKind::mlp ? "mlp" : "lut"; }

void MixerConfig::validate(int64_t dim) const {
    if (kind == MixerKind::mlp) {
        if (hidden_ratio < 1) throw ConfigError("mixer: hidden_ratio must be >= 1");
        return;
    }
    if (therm_bits < 1) throw ConfigError("mixer: therm_bits must be >= 1");
    if (widths.empty()) throw ConfigError("mixer: lut kind needs at least one layer width");
    if (fan_in < 2 || fan_in > 6) throw ConfigError("mixer: fan-in must be in [2,6]");
    int64_t in = dim * therm_bits;
    for (int64_t w : widths) {
        if (w < 1) throw ConfigError("mixer: lut layer width must be >= 1");
        if (in < fan_in) throw ConfigError("mixer: lut layer input narrower than fan-in");
        in = w;
    }
}

MixerParamCount mixer_param_count(const MixerConfig& cfg, int64_t dim) {
    MixerParamCount c;
    c.norm_params = 2 * dim;
    if (cfg.kind == MixerKind::mlp) {
        c.dense_weights = 2 * static_cast<int64_t>(cfg.hidden_ratio) * dim * dim;
        c.dense_biases = (static_cast<int64_t>(cfg.hidden_ratio) + 1) * dim;
        return c;
    }
    const int64_t entries = int64_t{1} << cfg.fan_in;
    for (int64_t w : cfg.widths) c.latent_entries += w * entries;
    c.encoded_values = dim * cfg.widths.back();
    c.thresholds = dim * cfg.therm_bits;
    return c;
}

ChannelMixer::ChannelMixer(const std::string& name, const MixerConfig& cfg, int64_t dim,
                           uint64_t map_seed, Rng& rng)
    : cfg_(cfg), dim_(dim), norm_(name + ".norm", dim) {
    cfg_.validate(dim);
    if (cfg_.kind == MixerKind::mlp) {
        const int64_t hidden = cfg_.hidden_ratio * dim;
        fc1_ = Linear(name + ".fc1", dim, hidden, /*bias=*/true, rng);
        fc2_ = Linear(name + ".fc2", hidden, dim, /*bias=*/true, rng);
        return;
    }
    int64_t in = dim * cfg_.therm_bits;
    luts_.reserve(cfg_.widths.size());
    for (size_t l = 0; l < cfg_.widths.size(); ++l) {
        luts_.emplace_back(name + ".lut" + std::to_string(l), in, cfg_.widths[l], cfg_.fan_in,
                           Rng::derive(map_seed, l), rng, cfg_.latent_lr_scale);
        luts_.back().set_local_diff(cfg_.local_diff);
        in = cfg_.widths[l];
    }
    condsum_ = CondSumLayer(name + ".condsum", dim, cfg_.widths.back(), rng);
}

bool ChannelMixer::needs_calibration() const {
    return cfg_.kind == MixerKind::lut && !codec_.calibrated();
}

int ChannelMixer::calibrate(const Tensor& sample) {
    if (cfg_.kind != MixerKind::lut) return 0;
    int perturbed = 0;
    Tensor normed = norm_.forward(sample);
    codec_ = thermometer_calibrate(cfg_.therm_bits, normed, &perturbed);
    return perturbed;
}

Tensor ChannelMixer::forward(const Tensor& z) {
    Tensor h = norm_.forward(z);
    Tensor core;
    if (cfg_.kind == MixerKind::mlp) {
        cached_h1_ = fc1_.forward(h);
        Tensor a = gelu(cached_h1_);
        core = fc2_.forward(a);
    } else {
        if (!codec_.calibrated()) throw UsageError("mixer: forward before thermometer calibration");
        BitTensor bits = thermometer_encode(codec_, h);
        for (auto& lut : luts_) bits = lut.forward(bits);
        core = condsum_.forward(bits);
    }
    add_inplace(core, z);
    return core;
}

Tensor ChannelMixer::backward(const Tensor& dout) {
    if (cfg_.kind == MixerKind::mlp) {
        Tensor da = fc2_.backward(dout);
        Tensor dh1;
        gelu_backward(cached_h1_, da, dh1);
        Tensor dh = fc1_.backward(dh1);
        Tensor dz = norm_.backward(dh);
        add_inplace(dz, dout);  // residual identity
        return dz;
    }
    Tensor dbits = condsum_.backward(dout);
    for (auto it = luts_.rbegin(); it != luts_.rend(); ++it) {
        dbits = it->backward(dbits);
    }
    // the thermometer is non-differentiable and its thresholds are frozen,
    // so the core branch's gradient stops here; only the residual identity
    // reaches the input (norm gamma/beta keep zero grad in this mode)
    return dout;
}

std::vector<Parameter*> ChannelMixer::params() {
    std::vector<Parameter*> out = norm_.params();
    if (cfg_.kind == MixerKind::mlp) {
        for (auto* p : fc1_.params()) out.push_back(p);
        for (auto* p : fc2_.params()) out.push_back(p);
        return out;
    }
    for (auto& lut : luts_) {
        for (auto* p : lut.params()) out.push_back(p);
    }
    for (auto* p : condsum_.params()) out.push_back(p);
    return out;
}

}  // namespace llvit
