#pragma once

#include <cstdint>

#include "llvit/bit_tensor.hpp"
#include "llvit/tensor.hpp"

namespace llvit {

// Multi-bit unary encoder: each feature d gets b ordered thresholds, and a
// scalar encodes to the unary pattern "1 for every threshold it exceeds".
// Thresholds are placed at empirical quantiles of a calibration sample and
// frozen afterwards; no gradient ever flows into them.
struct ThermometerCodec {
    int bits = 0;       // b
    Tensor thresholds;  // [D, b] f32, strictly increasing along the b axis

    bool calibrated() const { return bits > 0; }
    int64_t features() const { return calibrated() ? thresholds.dim(0) : 0; }
};

// Places per-feature thresholds at the k/(b+1) quantiles (k = 1..b) of the
// sample columns, with linear interpolation between order statistics.
// Constant (or near-constant) columns yield degenerate thresholds; those are
// spread apart by a feature-scaled epsilon, and the count of such features
// is reported through `perturbed_features` when non-null.
ThermometerCodec thermometer_calibrate(int bits, const Tensor& sample,
                                       int* perturbed_features = nullptr);

// bit[d*b + j] = 1 iff x[d] > thresholds[d, j]; strict comparison, ties
// encode to 0. Bits are feature-major, least-significant level first.
BitTensor thermometer_encode(const ThermometerCodec& codec, const Tensor& x);

}  // namespace llvit
