#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "llvit/bit_tensor.hpp"
#include "llvit/data.hpp"
#include "llvit/lut_layer.hpp"
#include "llvit/model.hpp"
#include "llvit/tensor.hpp"

namespace llvit {

// Fixed-point rescale: y = round_half_away(x * mult * 2^-shift), with
// mult in [2^30, 2^31) so the ratio carries 31 significant bits.
struct Requant {
    int32_t mult = 1 << 30;
    int shift = 30;

    static Requant from_ratio(double ratio);
    int32_t apply(int64_t v) const;                 // no clamp
    int8_t apply_i8(int64_t v) const;               // clamp to int8
};

// Dynamic operation counts, keyed by layer family (matching the cost-report
// row names for the GEMM stages).
struct OpCounts {
    int64_t mults = 0, adds = 0, lookups = 0, compares = 0;
    OpCounts& operator+=(const OpCounts& o) {
        mults += o.mults;
        adds += o.adds;
        lookups += o.lookups;
        compares += o.compares;
        return *this;
    }
};
using OpCensus = std::map<std::string, OpCounts>;

// ---- integer kernels (pure, no floating point inside) ----

// Base-2 softmax over an int32 score row: subtract the row max, approximate
// 2^-t with a Q15 quadratic on the fractional part and a right shift by the
// integer part, then apportion so every row sums to exactly 127 (output
// scale 1/127). `mult_q20` is round(scale * log2(e) * 2^20), where `scale`
// converts score units to logits.
void int_softmax_row(const int32_t* scores, int64_t n, int64_t mult_q20, int8_t* out);

// Precomputed per-tensor layer normalization over int8 rows sharing one
// input scale (which cancels). gamma is int16 at scale s_g = max|gamma|/2^15,
// beta is folded at 2^24/s_g, and `rq` carries s_g*2^-24 / s_out.
// A zero-variance row yields `beta_out_q`.
struct IntLayerNorm {
    std::vector<int16_t> gamma_q;
    std::vector<int64_t> beta_fx;
    std::vector<int8_t> beta_out_q;
    Requant rq;
    int32_t sqrt_dim_q14 = 0;  // round(sqrt(D) * 2^14)

    void run_row(const int8_t* x, int64_t d, int8_t* out) const;
};

// Fixed-point 1/sqrt for the normalized mantissa; exposed for tests.
// Returns r ~ 2^46 / sqrt(m) for m in [2^30, 2^32).
int64_t inv_sqrt_fixed(uint64_t m);

// int8 GEMM + int32 bias with a single output requant; weights [in, out].
struct IntLinear {
    Tensor w;  // i8 [in, out]
    std::vector<int32_t> bias;
    Requant rq;
    float out_scale = 1.0f;
};

struct IntSoftmaxParams {
    int64_t mult_q20 = 0;
};

struct IntAttention {
    IntLinear q, k, v;       // from the norm1 output scale
    IntSoftmaxParams sm;
    Requant ctx_rq;          // (s_v/127 * 1) -> s_ctx
    float ctx_scale = 1.0f;
    IntLinear proj;          // requant lands on the residual scale
};

struct IntLutMixer {
    IntLayerNorm norm;            // residual scale -> s_norm
    float norm_out_scale = 1.0f;
    Tensor thresholds_q;          // i8 [D, b]
    int therm_bits = 0;
    std::vector<LutMapping> maps;
    // binarized truth tables, layer-major: tables[l] holds J rows of 2^n bits
    std::vector<BitTensor> tables;
    Tensor condsum_wq;            // i8 [D, J_last]
    int condsum_bits = 4;
    std::vector<Requant> out_rq;  // size 1 (per layer) or D (per channel)
};

struct IntMlpMixer {
    IntLayerNorm norm;
    float norm_out_scale = 1.0f;
    IntLinear fc1;                     // -> s_h1
    std::array<int8_t, 256> gelu_lut;  // int8(s_h1) -> int8(s_act)
    IntLinear fc2;                     // -> residual scale
};

struct IntBlock {
    IntLayerNorm norm1;
    float norm1_out_scale = 1.0f;
    IntAttention attn;
    bool is_lut = false;
    IntLutMixer lut_mixer;
    IntMlpMixer mlp_mixer;
};

// Fully integer model: pixel bytes in, int32 logits out. All activations on
// the residual stream share one int8 scale; every sublayer requantizes its
// contribution onto that scale, adds the residual in int32, and clamps.
class IntModel {
   public:
    ModelConfig cfg;
    float s_res = 1.0f;  // residual-stream activation scale

    // pixel byte -> normalized -> int8(s_res-independent embed input scale)
    std::vector<std::array<int8_t, 256>> pixel_lut;  // per channel
    float s_px = 1.0f;
    IntLinear embed;        // patch projection, requants onto s_res
    Tensor pos_q, cls_q;    // i8 at s_res
    std::vector<IntBlock> blocks;
    IntLayerNorm final_norm;
    float final_norm_scale = 1.0f;
    Tensor head_w;  // i8
    std::vector<int32_t> head_bias;

    // raw uint8 HWC pixels for `count` samples -> int32 logits [count, classes]
    Tensor logits(const uint8_t* pixels, int64_t count, OpCensus* census = nullptr) const;
    std::vector<int32_t> predict(const Dataset& ds, int64_t start, int64_t count,
                                 OpCensus* census = nullptr) const;

    // integer mixer on an already-quantized token matrix (residual scale);
    // exposed for the netlist round-trip and kernel tests
    Tensor mixer_forward(int block_index, const Tensor& z_q, OpCensus* census = nullptr) const;

    // thermometer -> LUT cascade -> conditional summation on normalized int8
    // rows (the part a deployment netlist captures); returns the raw int32
    // accumulators before the output requant
    Tensor mixer_core(int block_index, const Tensor& h_q, OpCensus* census = nullptr) const;
};

// Calibrates activation scales on up to `calib_samples` images from `calib`
// (float forward passes), quantizes all weights, and freezes the integer
// model. `condsum_bits` selects the encoded-value width (8/4/2).
IntModel quantize_model(Model& model, const Dataset& calib, int64_t calib_samples,
                        int condsum_bits = 4);

}  // namespace llvit
