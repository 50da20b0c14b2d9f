#include "llvit/lut_layer.hpp"

#include <algorithm>
#include <numeric>

#include "llvit/errors.hpp"

namespace llvit {

LutMapping make_mapping(int64_t input_width, int64_t neurons, int fan_in, uint64_t seed) {
    if (fan_in < 1) throw ConfigError("lut mapping: fan-in must be >= 1");
    if (input_width < fan_in) {
        throw ConfigError("lut mapping: input width smaller than fan-in");
    }
    LutMapping m;
    m.input_width = input_width;
    m.neurons = neurons;
    m.fan_in = fan_in;
    m.map.resize(static_cast<size_t>(neurons * fan_in));

    Rng rng(seed);
    std::vector<int32_t> perm(static_cast<size_t>(input_width));
    std::iota(perm.begin(), perm.end(), 0);
    size_t pos = perm.size();  // force a shuffle on first draw

    for (int64_t j = 0; j < neurons; ++j) {
        int32_t* chunk = m.map.data() + j * fan_in;
        for (int t = 0; t < fan_in; ++t) {
            if (pos == perm.size()) {
                rng.shuffle(perm);
                pos = 0;
            }
            int32_t v = perm[pos];
            // A duplicate can only appear when the chunk straddles a shuffle
            // boundary; swap in the first later value of the current shuffle
            // that is not already used by this neuron. The swap keeps `perm`
            // a permutation, so overall use counts stay balanced.
            const auto used = [&](int32_t c) {
                return std::find(chunk, chunk + t, c) != chunk + t;
            };
            if (used(v)) {
                for (size_t s = pos + 1; s < perm.size(); ++s) {
                    if (!used(perm[s])) {
                        std::swap(perm[pos], perm[s]);
                        v = perm[pos];
                        break;
                    }
                }
            }
            chunk[t] = v;
            ++pos;
        }
    }
    return m;
}

LutLayer::LutLayer(const std::string& name, int64_t input_width, int64_t neurons, int fan_in,
                   uint64_t map_seed, Rng& init_rng, float lr_scale)
    : map_(make_mapping(input_width, neurons, fan_in, map_seed)) {
    const int64_t entries = int64_t{1} << fan_in;
    Tensor init = Tensor::zeros({neurons, entries}, Dtype::f32);
    float* p = init.f32();
    for (int64_t i = 0; i < init.numel(); ++i) p[i] = init_rng.uniform(-1.0f, 1.0f);
    latent_ = Parameter(name + ".latent", std::move(init), /*decay=*/false, lr_scale);
}

BitTensor LutLayer::forward(const BitTensor& x) {
    if (x.width() != map_.input_width) {
        throw DimensionError("lut layer: input width mismatch");
    }
    const int64_t rows = x.rows();
    const int64_t j_count = map_.neurons;
    const int n = map_.fan_in;
    BitTensor out(rows, j_count);
    cached_addr_.assign(static_cast<size_t>(rows * j_count), 0);
    cached_rows_ = rows;
    const float* lat = latent_.value.f32();
    const int64_t entries = int64_t{1} << n;

#pragma omp parallel for schedule(static)
    for (int64_t r = 0; r < rows; ++r) {
        for (int64_t j = 0; j < j_count; ++j) {
            const int32_t* sel = map_.map.data() + j * n;
            int32_t addr = 0;
            for (int i = 0; i < n; ++i) {
                addr |= static_cast<int32_t>(x.get(r, sel[i])) << i;
            }
            cached_addr_[static_cast<size_t>(r * j_count + j)] = addr;
            if (lat[j * entries + addr] >= 0.0f) out.set(r, j, true);
        }
    }
    has_forward_ = true;
    return out;
}

Tensor LutLayer::efd_table() const {
    const int64_t j_count = map_.neurons;
    const int n = map_.fan_in;
    const int64_t entries = int64_t{1} << n;
    const float inv = 1.0f / static_cast<float>(int64_t{1} << (n - 1));
    Tensor efd = Tensor::zeros({j_count, n}, Dtype::f32);
    float* e = efd.f32();
    const float* lat = latent_.value.f32();
#pragma omp parallel for schedule(static)
    for (int64_t j = 0; j < j_count; ++j) {
        const float* row = lat + j * entries;
        for (int i = 0; i < n; ++i) {
            float acc = 0.0f;
            for (int64_t a = 0; a < entries; ++a) {
                acc += ((a >> i) & 1) ? row[a] : -row[a];
            }
            e[j * n + i] = acc * inv;
        }
    }
    return efd;
}

Tensor LutLayer::backward(const Tensor& upstream) {
    if (!has_forward_) throw UsageError("lut layer: backward before forward");
    const int64_t rows = cached_rows_;
    const int64_t j_count = map_.neurons;
    const int n = map_.fan_in;
    const int64_t entries = int64_t{1} << n;
    if (upstream.dim(0) != rows || upstream.dim(1) != j_count) {
        throw DimensionError("lut layer: upstream gradient shape mismatch");
    }

    const float* up = upstream.f32();
    float* glat = latent_.grad.f32();
    // straight-through into the addressed latent entries; each neuron owns a
    // disjoint slice of the grad table, rows scanned in order
#pragma omp parallel for schedule(static)
    for (int64_t j = 0; j < j_count; ++j) {
        for (int64_t r = 0; r < rows; ++r) {
            const int32_t addr = cached_addr_[static_cast<size_t>(r * j_count + j)];
            glat[j * entries + addr] += up[r * j_count + j];
        }
    }

    Tensor dx = Tensor::zeros({rows, map_.input_width}, Dtype::f32);
    float* dxp = dx.f32();
    const float* lat = latent_.value.f32();

    if (!local_diff_) {
        Tensor efd = efd_table();
        const float* e = efd.f32();
#pragma omp parallel for schedule(static)
        for (int64_t r = 0; r < rows; ++r) {
            float* dxr = dxp + r * map_.input_width;
            for (int64_t j = 0; j < j_count; ++j) {
                const float g = up[r * j_count + j];
                const int32_t* sel = map_.map.data() + j * n;
                for (int i = 0; i < n; ++i) dxr[sel[i]] += g * e[j * n + i];
            }
        }
    } else {
        // ablation: single difference at the row's own address
#pragma omp parallel for schedule(static)
        for (int64_t r = 0; r < rows; ++r) {
            float* dxr = dxp + r * map_.input_width;
            for (int64_t j = 0; j < j_count; ++j) {
                const float g = up[r * j_count + j];
                const int32_t addr = cached_addr_[static_cast<size_t>(r * j_count + j)];
                const float* row = lat + j * entries;
                const int32_t* sel = map_.map.data() + j * n;
                for (int i = 0; i < n; ++i) {
                    const float diff = row[addr | (1 << i)] - row[addr & ~(1 << i)];
                    dxr[sel[i]] += g * diff;
                }
            }
        }
    }
    return dx;
}

std::vector<Parameter*> LutLayer::params() { return {&latent_}; }

}  // namespace llvit
