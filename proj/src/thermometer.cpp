#include "llvit/thermometer.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "llvit/errors.hpp"

namespace llvit {

ThermometerCodec thermometer_calibrate(int bits, const Tensor& sample, int* perturbed_features) {
    if (bits < 1) throw ConfigError("thermometer: bits_per_feature must be >= 1");
    if (sample.ndim() != 2) throw DimensionError("thermometer: calibration sample must be [S,D]");
    const int64_t s = sample.dim(0);
    const int64_t d = sample.dim(1);
    if (s < bits + 1) throw ConfigError("thermometer: need at least bits+1 calibration samples");

    ThermometerCodec codec;
    codec.bits = bits;
    codec.thresholds = Tensor::zeros({d, bits}, Dtype::f32);
    float* th = codec.thresholds.f32();
    const float* sp = sample.f32();

    std::vector<int> perturbed(static_cast<size_t>(d), 0);
#pragma omp parallel for schedule(static)
    for (int64_t f = 0; f < d; ++f) {
        std::vector<float> col(static_cast<size_t>(s));
        for (int64_t r = 0; r < s; ++r) col[static_cast<size_t>(r)] = sp[r * d + f];
        std::sort(col.begin(), col.end());
        for (int j = 0; j < bits; ++j) {
            const double q = static_cast<double>(j + 1) / static_cast<double>(bits + 1);
            const double pos = q * static_cast<double>(s - 1);
            const int64_t lo = static_cast<int64_t>(pos);
            const double frac = pos - static_cast<double>(lo);
            const double a = col[static_cast<size_t>(lo)];
            const double b = col[static_cast<size_t>(std::min(lo + 1, s - 1))];
            th[f * bits + j] = static_cast<float>(a + frac * (b - a));
        }
        // enforce strict increase; degenerate levels get spread by an epsilon
        // scaled to the feature's magnitude
        const float span = std::max(std::abs(col.front()), std::abs(col.back()));
        const float eps = 1e-5f * std::max(span, 1.0f);
        for (int j = 1; j < bits; ++j) {
            float& t = th[f * bits + j];
            const float prev = th[f * bits + j - 1];
            if (t <= prev) {
                t = prev + eps;
                perturbed[static_cast<size_t>(f)] = 1;
            }
        }
    }
    if (perturbed_features) {
        int n = 0;
        for (int64_t f = 0; f < d; ++f) n += perturbed[static_cast<size_t>(f)];
        *perturbed_features = n;
    }
    return codec;
}

BitTensor thermometer_encode(const ThermometerCodec& codec, const Tensor& x) {
    if (!codec.calibrated()) throw UsageError("thermometer: encode before calibrate");
    if (x.ndim() != 2 || x.dim(1) != codec.features()) {
        throw DimensionError("thermometer: input width does not match codec");
    }
    const int64_t n = x.dim(0);
    const int64_t d = codec.features();
    const int b = codec.bits;
    BitTensor out(n, d * b);
    const float* xp = x.f32();
    const float* th = codec.thresholds.f32();
#pragma omp parallel for schedule(static)
    for (int64_t r = 0; r < n; ++r) {
        for (int64_t f = 0; f < d; ++f) {
            const float v = xp[r * d + f];
            for (int j = 0; j < b; ++j) {
                if (v > th[f * b + j]) out.set(r, f * b + j, true);
            }
        }
    }
    return out;
}

}  // namespace llvit
