#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "llvit/bit_tensor.hpp"
#include "llvit/layers.hpp"
#include "llvit/rng.hpp"
#include "llvit/tensor.hpp"

namespace llvit {

enum class QuantGranularity { per_layer, per_channel };

QuantGranularity quant_granularity_from_name(const std::string& name);
std::string quant_granularity_name(QuantGranularity g);

// Symmetric fixed-point image of an encoded-value matrix. `wq` stores the
// narrow integers widened to int8; `bits` records the nominal width
// (values lie in [-2^(bits-1), 2^(bits-1)-1]). One scale for the whole
// matrix, or one per output channel.
struct QuantizedEncoded {
    Tensor wq;                  // [D, J] i8
    std::vector<float> scales;  // size 1 (per layer) or D (per channel)
    int bits = 4;
    QuantGranularity granularity = QuantGranularity::per_layer;

    float scale_for(int64_t channel) const {
        return granularity == QuantGranularity::per_layer ? scales[0]
                                                          : scales[static_cast<size_t>(channel)];
    }
};

// Output layer of the LUT mixer: for every output channel i, adds the
// learned value W[i,j] whenever input bit j fires. Exactly linear in the
// bits, so inference is pure masked addition; the trained W is real-valued
// and deployable at reduced precision via quantize_encoded.
class CondSumLayer {
   public:
    CondSumLayer() = default;
    CondSumLayer(const std::string& name, int64_t out_dim, int64_t in_bits, Rng& rng);

    Tensor forward(const BitTensor& x);       // [N, D]
    // Accumulates grad_W; returns dense grad wrt input bits [N, J].
    Tensor backward(const Tensor& upstream);

    std::vector<Parameter*> params();
    const Parameter& weight() const { return w_; }
    Parameter& weight() { return w_; }
    int64_t out_dim() const { return w_.value.dim(0); }
    int64_t in_bits() const { return w_.value.dim(1); }

   private:
    Parameter w_;  // [D, J]
    BitTensor cached_x_;
    bool has_forward_ = false;
};

// s = max|W| / (2^(bits-1) - 1); Wq = clamp(round_half_to_even(W/s),
// -2^(bits-1), 2^(bits-1)-1). All-zero input gets s = 1 and Wq = 0.
QuantizedEncoded quantize_encoded(const Tensor& w, int bits,
                                  QuantGranularity granularity = QuantGranularity::per_layer);

// Float image of the quantized matrix (scale * Wq), for PTQ evaluation.
Tensor dequantize_encoded(const QuantizedEncoded& q);

}  // namespace llvit
