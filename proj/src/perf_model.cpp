#include "llvit/perf_model.hpp"

#include <algorithm>

#include "llvit/errors.hpp"

namespace llvit {

void HwConfig::validate() const {
    if (systolic_dim < 1) throw ConfigError("hw: systolic dimension must be >= 1");
    if (clock_mhz <= 0) throw ConfigError("hw: clock must be positive");
    if (nonlinear_lanes_per_dim < 1) throw ConfigError("hw: lane multiplier must be >= 1");
}

namespace {

int64_t ceil_div(int64_t a, int64_t b) { return (a + b - 1) / b; }

// elementwise nonlinear kernels: 1 element/cycle/lane, dim lanes
int64_t elementwise_cycles(int64_t elements, int64_t dim, const HwConfig& hw) {
    return ceil_div(elements, dim * hw.nonlinear_lanes_per_dim);
}

}  // namespace

int64_t gemm_cycles(int64_t m, int64_t k, int64_t cols, const HwConfig& hw) {
    if (m < 1 || k < 1 || cols < 1) throw ConfigError("gemm cycles: dimensions must be positive");
    const int64_t p = hw.systolic_dim;
    return ceil_div(m, p) * ceil_div(cols, p) * (k + 2 * p);
}

int64_t mixer_pe_cycles(const MixerConfig& cfg, int64_t tokens, int64_t dim, const HwConfig& hw) {
    (void)dim;
    (void)hw;
    if (cfg.kind != MixerKind::lut) {
        throw ConfigError("mixer PE cycles: only the lut mixer maps to the PE");
    }
    const int64_t j = cfg.widths.back();
    // leading stages (thermometer compare, one lookup per LUT layer) each
    // take one cycle per row and only show up as pipeline fill
    const int64_t fill = 2 + static_cast<int64_t>(cfg.widths.size());
    return tokens * j + fill;
}

LatencyReport model_latency(const ModelConfig& cfg, const HwConfig& hw) {
    cfg.validate();
    hw.validate();
    LatencyReport rep;
    const int64_t n = cfg.tokens();
    const int64_t d = cfg.dim;
    const int64_t dh = d / cfg.heads;
    const int64_t np = cfg.num_patches();

    auto add = [&](const std::string& name, int64_t cycles) {
        rep.encoder_stages.push_back({name, cycles});
        rep.encoder_cycles += cycles;
    };

    add("norm1", elementwise_cycles(n * d, d, hw));
    add("qkv", gemm_cycles(n, d, 3 * d, hw));
    // heads processed sequentially through the same array
    add("qkT", cfg.heads * gemm_cycles(n, dh, n, hw));
    add("shiftmax", elementwise_cycles(static_cast<int64_t>(cfg.heads) * n * n, d, hw));
    add("softmaxV", cfg.heads * gemm_cycles(n, n, dh, hw));
    add("proj", gemm_cycles(n, d, d, hw));

    if (cfg.mixer.kind == MixerKind::mlp) {
        const int64_t hidden = cfg.mixer.hidden_ratio * d;
        add("norm2", elementwise_cycles(n * d, d, hw));
        add("ff1", gemm_cycles(n, d, hidden, hw));
        add("gelu", elementwise_cycles(n * hidden, d, hw));
        add("ff2", gemm_cycles(n, hidden, d, hw));
    } else {
        add("norm2", elementwise_cycles(n * d, d, hw));
        add("lut-mixer", mixer_pe_cycles(cfg.mixer, n, d, hw));
    }

    rep.embed_cycles = gemm_cycles(np, cfg.patch_dim(), d, hw);
    rep.head_cycles = gemm_cycles(1, d, cfg.num_classes, hw);
    rep.total_cycles =
        rep.embed_cycles + static_cast<int64_t>(cfg.depth) * rep.encoder_cycles + rep.head_cycles;

    const double hz = hw.clock_mhz * 1e6;
    rep.latency_ms = static_cast<double>(rep.total_cycles) / hz * 1e3;
    rep.bottleneck_cycles =
        std::max({rep.embed_cycles, rep.encoder_cycles, rep.head_cycles});
    rep.fps = hz / static_cast<double>(rep.bottleneck_cycles);
    return rep;
}

std::vector<SweepRow> latency_sweep(const ModelConfig& cfg, const HwConfig& base,
                                    const std::vector<int>& dims) {
    std::vector<SweepRow> rows;
    for (int p : dims) {
        HwConfig hw = base;
        hw.systolic_dim = p;
        rows.push_back({p, model_latency(cfg, hw)});
    }
    return rows;
}

}  // namespace llvit
