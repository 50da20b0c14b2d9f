#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "llvit/model.hpp"

namespace llvit {

struct HwConfig {
    int systolic_dim = 32;   // P (P x P multiply-accumulate array)
    double clock_mhz = 200.0;
    // nonlinear kernels (softmax, layernorm, gelu) process this many
    // elements per cycle per lane, with `dim` lanes
    int nonlinear_lanes_per_dim = 1;

    void validate() const;  // throws ConfigError
};

// Output-stationary tiling on a P x P array: each of the
// ceil(M/P) * ceil(cols/P) output tiles streams K partial products plus 2P
// fill/drain cycles.
int64_t gemm_cycles(int64_t m, int64_t k, int64_t cols, const HwConfig& hw);

// Channel-mixer processing element: rows stream through encode -> lookups ->
// iterative conditional summation; the summation of the J final-layer LUT
// outputs (with the residual folded into the same iteration) dominates at J
// cycles per row, plus pipeline fill for the shorter leading stages.
int64_t mixer_pe_cycles(const MixerConfig& cfg, int64_t tokens, int64_t dim, const HwConfig& hw);

struct StageCycles {
    std::string name;
    int64_t cycles = 0;
};

struct LatencyReport {
    std::vector<StageCycles> encoder_stages;
    int64_t encoder_cycles = 0;     // one encoder block
    int64_t embed_cycles = 0;
    int64_t head_cycles = 0;
    int64_t total_cycles = 0;       // embed + depth * encoder + head
    double latency_ms = 0.0;
    // frames pipeline at encoder-block granularity; throughput is set by the
    // slowest pipeline stage
    int64_t bottleneck_cycles = 0;
    double fps = 0.0;
};

LatencyReport model_latency(const ModelConfig& cfg, const HwConfig& hw);

struct SweepRow {
    int systolic_dim;
    LatencyReport report;
};

std::vector<SweepRow> latency_sweep(const ModelConfig& cfg, const HwConfig& base,
                                    const std::vector<int>& dims);

}  // namespace llvit
