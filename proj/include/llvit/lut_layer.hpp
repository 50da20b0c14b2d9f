#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "llvit/bit_tensor.hpp"
#include "llvit/layers.hpp"
#include "llvit/rng.hpp"
#include "llvit/tensor.hpp"

namespace llvit {

// Which input bits feed each n-input LUT neuron. Generated from concatenated
// seeded shuffles of [0, I) so that use counts across the layer differ by at
// most one and no neuron reads the same bit twice.
struct LutMapping {
    int64_t input_width = 0;   // I
    int64_t neurons = 0;       // J
    int fan_in = 0;            // n
    std::vector<int32_t> map;  // [J * n], entries in [0, I)
};

LutMapping make_mapping(int64_t input_width, int64_t neurons, int fan_in, uint64_t seed);

// A layer of J LUT neurons with fan-in n. Each neuron holds 2^n latent real
// entries; the forward path looks up the entry addressed by its mapped input
// bits (LSB-first: addr = sum_i bit_i * 2^i) and binarizes by sign
// (latent >= 0 -> 1). The backward path is straight-through into the latent
// entries and a finite-difference surrogate toward the input bits: the
// gradient for mapped bit i is the mean, over all 2^(n-1) settings of the
// other bits, of latent[addr(bit_i=1)] - latent[addr(bit_i=0)]. A local mode
// replaces the mean with the single difference at the row's own address.
class LutLayer {
   public:
    LutLayer() = default;
    LutLayer(const std::string& name, int64_t input_width, int64_t neurons, int fan_in,
             uint64_t map_seed, Rng& init_rng, float lr_scale = 10.0f);

    BitTensor forward(const BitTensor& x);

    // upstream: [N, J]; accumulates latent grads, returns grad wrt input
    // bits [N, I] under the straight-through relaxation.
    Tensor backward(const Tensor& upstream);

    std::vector<Parameter*> params();
    const LutMapping& mapping() const { return map_; }
    const Parameter& latent() const { return latent_; }
    Parameter& latent() { return latent_; }
    void set_local_diff(bool on) { local_diff_ = on; }

    // Per-(neuron, mapped-bit) surrogate derivative table used by the
    // non-local backward; exposed for tests.
    Tensor efd_table() const;

   private:
    LutMapping map_;
    Parameter latent_;  // [J, 2^n]
    bool local_diff_ = false;
    std::vector<int32_t> cached_addr_;  // [N * J]
    int64_t cached_rows_ = 0;
    bool has_forward_ = false;
};

}  // namespace llvit
