#include "llvit/int_infer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <vector>

#include "llvit/errors.hpp"
#include "llvit/ops.hpp"
#include "llvit/thermometer.hpp"

namespace llvit {

namespace {

// round-half-away-from-zero right shift; k <= 0 degenerates to a left shift
int64_t shr_round(__int128 x, int k) {
    if (k <= 0) return static_cast<int64_t>(x << (-k));
    const __int128 h = static_cast<__int128>(1) << (k - 1);
    if (x >= 0) return static_cast<int64_t>((x + h) >> k);
    return -static_cast<int64_t>(((-x) + h) >> k);
}

int8_t clamp_i8(int64_t v) {
    return static_cast<int8_t>(std::clamp<int64_t>(v, -127, 127));
}

float max_abs(const Tensor& t) {
    const float* p = t.f32();
    float mx = 0.0f;
    for (int64_t i = 0; i < t.numel(); ++i) mx = std::max(mx, std::fabs(p[i]));
    return mx;
}

void track_max(float& acc, const Tensor& t) { acc = std::max(acc, max_abs(t)); }

float to_scale(float maxabs) { return maxabs > 0.0f ? maxabs / 127.0f : 1.0f; }

// symmetric int8 at a fixed scale (activation constants such as the class
// token and positional table, which live on the residual scale)
Tensor quantize_at(const Tensor& t, float scale) {
    Tensor q = Tensor::zeros(t.shape(), Dtype::i8);
    const float* p = t.f32();
    int8_t* o = q.i8();
    for (int64_t i = 0; i < t.numel(); ++i) {
        o[i] = clamp_i8(static_cast<int64_t>(std::nearbyintf(p[i] / scale)));
    }
    return q;
}

struct GemmCensus {
    OpCensus* census;
    void gemm(const char* key, int64_t rows, int64_t k, int64_t cols, bool bias) const {
        if (!census) return;
        OpCounts& c = (*census)[key];
        c.mults += rows * k * cols;
        c.adds += rows * k * cols + (bias ? rows * cols : 0);
    }
    void add(const char* key, const OpCounts& delta) const {
        if (census) (*census)[key] += delta;
    }
};

// acc = x * w + bias (int8 GEMM with int32 accumulation)
Tensor int_linear_acc(const Tensor& x, const IntLinear& lin) {
    Tensor acc = matmul(x, lin.w);
    int32_t* a = acc.i32();
    const int64_t rows = acc.dim(0), cols = acc.dim(1);
    if (!lin.bias.empty()) {
#pragma omp parallel for schedule(static)
        for (int64_t r = 0; r < rows; ++r) {
            int32_t* row = a + r * cols;
            for (int64_t j = 0; j < cols; ++j) row[j] += lin.bias[static_cast<size_t>(j)];
        }
    }
    return acc;
}

// requant the accumulator to the layer's own int8 output scale
Tensor int_linear_i8(const Tensor& x, const IntLinear& lin) {
    Tensor acc = int_linear_acc(x, lin);
    Tensor out = Tensor::zeros(acc.shape(), Dtype::i8);
    const int32_t* a = acc.i32();
    int8_t* o = out.i8();
    const int64_t n = acc.numel();
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) o[i] = lin.rq.apply_i8(a[i]);
    return out;
}

// layer-norm census: per row, 2d adds (sum and centering), ~4 multiplies per
// element (mantissa product, scale product, gamma, requant) plus a fixed
// Newton budget
OpCounts ln_counts(int64_t rows, int64_t d) {
    OpCounts c;
    c.adds = rows * 2 * d;
    c.mults = rows * (4 * d + 8);
    return c;
}

Tensor run_int_norm(const IntLayerNorm& ln, const Tensor& x) {
    const int64_t rows = x.dim(0), d = x.dim(1);
    Tensor out = Tensor::zeros(x.shape(), Dtype::i8);
    const int8_t* px = x.i8();
    int8_t* po = out.i8();
#pragma omp parallel for schedule(static)
    for (int64_t r = 0; r < rows; ++r) ln.run_row(px + r * d, d, po + r * d);
    return out;
}

IntLayerNorm build_int_norm(const Tensor& gamma, const Tensor& beta, int64_t d, float s_out) {
    IntLayerNorm ln;
    const float* g = gamma.f32();
    const float* b = beta.f32();
    float gm = max_abs(gamma);
    const double s_g = gm > 0.0f ? static_cast<double>(gm) / 32767.0 : 1.0;
    ln.gamma_q.resize(static_cast<size_t>(d));
    ln.beta_fx.resize(static_cast<size_t>(d));
    ln.beta_out_q.resize(static_cast<size_t>(d));
    for (int64_t i = 0; i < d; ++i) {
        ln.gamma_q[static_cast<size_t>(i)] = static_cast<int16_t>(
            std::clamp<long>(std::lround(g[i] / s_g), -32767, 32767));
        ln.beta_fx[static_cast<size_t>(i)] = std::llround(b[i] * 16777216.0 / s_g);
        ln.beta_out_q[static_cast<size_t>(i)] =
            clamp_i8(std::llround(b[i] / static_cast<double>(s_out)));
    }
    ln.rq = Requant::from_ratio(s_g / 16777216.0 / static_cast<double>(s_out));
    ln.sqrt_dim_q14 = static_cast<int32_t>(std::llround(std::sqrt(static_cast<double>(d)) * 16384.0));
    return ln;
}

IntLinear build_int_linear(const Tensor& w, const float* bias, float s_in, float s_out) {
    IntLinear lin;
    QuantizedEncoded q = quantize_encoded(w, 8);
    lin.w = std::move(q.wq);
    const float s_w = q.scales[0];
    const int64_t out_dim = w.dim(1);
    if (bias) {
        lin.bias.resize(static_cast<size_t>(out_dim));
        const double denom = static_cast<double>(s_in) * s_w;
        for (int64_t j = 0; j < out_dim; ++j) {
            lin.bias[static_cast<size_t>(j)] = static_cast<int32_t>(std::clamp<long long>(
                std::llround(bias[j] / denom), INT32_MIN, INT32_MAX));
        }
    }
    lin.rq = Requant::from_ratio(static_cast<double>(s_in) * s_w / static_cast<double>(s_out));
    lin.out_scale = s_out;
    return lin;
}

float gelu_scalar(float x) {
    Tensor t = Tensor::from({1}, {x});
    return gelu(t).f32()[0];
}

}  // namespace

Requant Requant::from_ratio(double ratio) {
    if (!(ratio > 0.0) || !std::isfinite(ratio)) {
        throw UsageError("requant: scale ratio must be positive and finite");
    }
    int shift = 0;
    double m = ratio;
    while (m < 0x1p30) {
        m *= 2.0;
        ++shift;
    }
    while (m >= 0x1p31) {
        m *= 0.5;
        --shift;
    }
    int64_t mult = std::llround(m);
    if (mult >= (1ll << 31)) {  // rounding bumped it to the next power of two
        mult >>= 1;
        --shift;
    }
    Requant r;
    r.mult = static_cast<int32_t>(mult);
    r.shift = shift;
    return r;
}

int32_t Requant::apply(int64_t v) const {
    return static_cast<int32_t>(shr_round(static_cast<__int128>(v) * mult, shift));
}

int8_t Requant::apply_i8(int64_t v) const { return clamp_i8(apply(v)); }

void int_softmax_row(const int32_t* scores, int64_t n, int64_t mult_q20, int8_t* out) {
    if (n <= 0) return;
    int32_t mx = scores[0];
    for (int64_t i = 1; i < n; ++i) mx = std::max(mx, scores[i]);

    // e_i ~ 2^-(t_i) * 2^15 with t_i = (mx - score_i) * scale * log2(e):
    // shift by the integer part, quadratic in the fractional part
    std::vector<int64_t> e(static_cast<size_t>(n));
    int64_t sum = 0;
    for (int64_t i = 0; i < n; ++i) {
        const int64_t t = (static_cast<int64_t>(mx) - scores[i]) * mult_q20;  // Q20
        const int64_t ti = t >> 20;
        const int64_t f = (t & 0xFFFFF) >> 5;  // Q15 fractional part
        // minimax quadratic for 2^-f on [0,1); the coefficients satisfy
        // 32768 - 22025 + 5641 = 16384, so the mantissa is continuous across
        // integer-part boundaries
        const int64_t poly = 32768 - ((22025 * f) >> 15) + ((5641 * ((f * f) >> 15)) >> 15);
        e[static_cast<size_t>(i)] = ti >= 40 ? 0 : (poly >> ti);
        sum += e[static_cast<size_t>(i)];
    }

    // scale so the row sums to exactly 127: floor division, then hand the
    // remainder to the largest fractional parts (ties to the lower index)
    std::vector<int64_t> rem(static_cast<size_t>(n));
    int64_t assigned = 0;
    for (int64_t i = 0; i < n; ++i) {
        const int64_t num = e[static_cast<size_t>(i)] * 127;
        out[i] = static_cast<int8_t>(num / sum);
        rem[static_cast<size_t>(i)] = num % sum;
        assigned += num / sum;
    }
    int64_t leftover = 127 - assigned;
    if (leftover > 0) {
        std::vector<int32_t> idx(static_cast<size_t>(n));
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(), [&](int32_t a, int32_t b) {
            return rem[static_cast<size_t>(a)] > rem[static_cast<size_t>(b)];
        });
        for (int64_t i = 0; i < leftover; ++i) ++out[idx[static_cast<size_t>(i)]];
    }
}

int64_t inv_sqrt_fixed(uint64_t m) {
    if (m < (1ull << 30) || m >= (1ull << 32)) {
        throw UsageError("inv_sqrt_fixed: mantissa out of [2^30, 2^32)");
    }
    // top-4-bit seed: round(2^46 / sqrt((i + 0.5) * 2^28)) for i = 4..15
    static const int64_t kSeed[16] = {0,          0,          0,          0,
                                      2024667000, 1831380208, 1684624773, 1568300315,
                                      1473161629, 1393471397, 1325455684, 1266516759,
                                      1214800200, 1168942037, 1127913670, 1090922784};
    int64_t r = kSeed[m >> 28];
    for (int it = 0; it < 2; ++it) {
        const unsigned __int128 mr2 =
            static_cast<unsigned __int128>(m) * static_cast<uint64_t>(r * r);
        const __int128 num = (static_cast<__int128>(3) << 92) - static_cast<__int128>(mr2);
        r = static_cast<int64_t>((static_cast<__int128>(r) * num) >> 93);
    }
    return r;
}

void IntLayerNorm::run_row(const int8_t* x, int64_t d, int8_t* out) const {
    int64_t sum = 0;
    for (int64_t i = 0; i < d; ++i) sum += x[i];
    // c_i = d*x_i - sum  ==  d * (x_i - mean); V = sum c^2 = d^3 * variance
    int64_t v = 0;
    for (int64_t i = 0; i < d; ++i) {
        const int64_t c = d * x[i] - sum;
        v += c * c;
    }
    if (v == 0) {  // constant row: normalized value is zero, only beta remains
        for (int64_t i = 0; i < d; ++i) out[i] = beta_out_q[static_cast<size_t>(i)];
        return;
    }
    // V = m * 4^s with m in [2^30, 2^32); r ~ 2^46 / sqrt(m)
    int s = 0;
    uint64_t m = static_cast<uint64_t>(v);
    while (m >= (1ull << 32)) {
        m >>= 2;
        ++s;
    }
    while (m < (1ull << 30)) {
        m <<= 2;
        --s;
    }
    const int64_t r = inv_sqrt_fixed(m);
    for (int64_t i = 0; i < d; ++i) {
        const int64_t c = d * x[i] - sum;
        // xhat_Q24 = c * sqrt(d) / sqrt(V) * 2^24 = c * A_q14 * r * 2^-(36+s)
        const int64_t w = c * sqrt_dim_q14;
        const int64_t xq24 = shr_round(static_cast<__int128>(w) * r, 36 + s);
        const int64_t acc = static_cast<int64_t>(gamma_q[static_cast<size_t>(i)]) * xq24 +
                            beta_fx[static_cast<size_t>(i)];
        out[i] = rq.apply_i8(acc);
    }
}

Tensor IntModel::mixer_core(int block_index, const Tensor& h_q, OpCensus* census) const {
    const IntBlock& blk = blocks[static_cast<size_t>(block_index)];
    if (!blk.is_lut) throw UsageError("mixer core: block is not a lut mixer");
    const IntLutMixer& mx = blk.lut_mixer;
    const int64_t rows = h_q.dim(0), d = h_q.dim(1), b = mx.therm_bits;
    GemmCensus gc{census};

    // thermometer: strict integer compares, feature-major LSB-first
    BitTensor bits(rows, d * b);
    const int8_t* ph = h_q.i8();
    const int8_t* pt = mx.thresholds_q.i8();
#pragma omp parallel for schedule(static)
    for (int64_t r = 0; r < rows; ++r) {
        const int8_t* hrow = ph + r * d;
        for (int64_t f = 0; f < d; ++f) {
            const int8_t* trow = pt + f * b;
            for (int64_t j = 0; j < b; ++j) {
                if (hrow[f] > trow[j]) bits.set(r, f * b + j, true);
            }
        }
    }
    OpCounts mixer_ops;
    mixer_ops.compares = rows * d * b;

    // LUT cascade: pure table reads
    for (size_t l = 0; l < mx.maps.size(); ++l) {
        const LutMapping& map = mx.maps[l];
        const BitTensor& table = mx.tables[l];
        BitTensor next(rows, map.neurons);
#pragma omp parallel for schedule(static)
        for (int64_t r = 0; r < rows; ++r) {
            for (int64_t j = 0; j < map.neurons; ++j) {
                const int32_t* fan = map.map.data() + j * map.fan_in;
                int addr = 0;
                for (int i = 0; i < map.fan_in; ++i) {
                    addr |= static_cast<int>(bits.get(r, fan[i])) << i;
                }
                if (table.get(j, addr)) next.set(r, j, true);
            }
        }
        bits = std::move(next);
        mixer_ops.lookups += rows * map.neurons;
    }

    // conditional summation: add W[ch, j] exactly when bit j fired
    const int64_t jlast = bits.width();
    Tensor acc = Tensor::zeros({rows, d}, Dtype::i32);
    int32_t* pa = acc.i32();
    const int8_t* pw = mx.condsum_wq.i8();
#pragma omp parallel for schedule(static)
    for (int64_t r = 0; r < rows; ++r) {
        int32_t* arow = pa + r * d;
        for (int64_t j = 0; j < jlast; ++j) {
            if (!bits.get(r, j)) continue;
            for (int64_t ch = 0; ch < d; ++ch) arow[ch] += pw[ch * jlast + j];
        }
    }
    int64_t fired = 0;
    for (int64_t r = 0; r < rows; ++r) fired += bits.popcount_row(r);
    mixer_ops.adds = fired * d;
    gc.add("lut-mixer", mixer_ops);
    return acc;
}

Tensor IntModel::mixer_forward(int block_index, const Tensor& z_q, OpCensus* census) const {
    const IntBlock& blk = blocks[static_cast<size_t>(block_index)];
    const int64_t rows = z_q.dim(0), d = z_q.dim(1);
    GemmCensus gc{census};
    Tensor out = Tensor::zeros({rows, d}, Dtype::i8);
    const int8_t* pz = z_q.i8();
    int8_t* po = out.i8();

    if (blk.is_lut) {
        const IntLutMixer& mx = blk.lut_mixer;
        Tensor h = run_int_norm(mx.norm, z_q);
        gc.add("layernorm", ln_counts(rows, d));
        Tensor acc = mixer_core(block_index, h, census);
        const int32_t* pa = acc.i32();
        const bool per_channel = mx.out_rq.size() > 1;
#pragma omp parallel for schedule(static)
        for (int64_t r = 0; r < rows; ++r) {
            for (int64_t ch = 0; ch < d; ++ch) {
                const Requant& rq = mx.out_rq[per_channel ? static_cast<size_t>(ch) : 0];
                // the single multiply on the mixer output path: requant the
                // conditional sum onto the residual scale, then integer add
                const int32_t contrib = rq.apply(pa[r * d + ch]);
                po[r * d + ch] = clamp_i8(static_cast<int64_t>(contrib) + pz[r * d + ch]);
            }
        }
        if (census) {
            (*census)["mixer-requant"].mults += rows * d;
            (*census)["residual"].adds += rows * d;
        }
        return out;
    }

    const IntMlpMixer& mx = blk.mlp_mixer;
    Tensor h = run_int_norm(mx.norm, z_q);
    gc.add("layernorm", ln_counts(rows, d));
    const int64_t hidden = mx.fc1.w.dim(1);
    Tensor h1 = int_linear_i8(h, mx.fc1);
    gc.gemm("ff1", rows, d, hidden, true);
    int8_t* p1 = h1.i8();
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < h1.numel(); ++i) {
        p1[i] = mx.gelu_lut[static_cast<size_t>(static_cast<int>(p1[i]) + 128)];
    }
    if (census) (*census)["gelu"].lookups += h1.numel();
    Tensor acc = int_linear_acc(h1, mx.fc2);
    gc.gemm("ff2", rows, hidden, d, true);
    const int32_t* pa = acc.i32();
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < rows * d; ++i) {
        po[i] = clamp_i8(static_cast<int64_t>(mx.fc2.rq.apply(pa[i])) + pz[i]);
    }
    if (census) {
        (*census)["requant"].mults += rows * d;
        (*census)["residual"].adds += rows * d;
    }
    return out;
}

Tensor IntModel::logits(const uint8_t* pixels, int64_t count, OpCensus* census) const {
    const int64_t n_tok = cfg.tokens(), d = cfg.dim, np = cfg.num_patches();
    const int64_t pd = cfg.patch_dim(), pside = cfg.patches_per_side();
    const int p = cfg.patch_size, ch = cfg.channels, w_img = cfg.image_size;
    const int heads = cfg.heads;
    const int64_t dh = d / heads;
    GemmCensus gc{census};

    // pixel bytes -> int8 patch rows through the per-channel lookup table
    Tensor patches = Tensor::zeros({count * np, pd}, Dtype::i8);
    int8_t* pp = patches.i8();
#pragma omp parallel for schedule(static)
    for (int64_t s = 0; s < count; ++s) {
        const uint8_t* img = pixels + s * w_img * w_img * ch;
        for (int64_t pt = 0; pt < np; ++pt) {
            const int64_t py = pt / pside, px = pt % pside;
            int8_t* row = pp + (s * np + pt) * pd;
            int64_t o = 0;
            for (int r = 0; r < p; ++r) {
                for (int c = 0; c < p; ++c) {
                    const int64_t base =
                        ((py * p + r) * w_img + (px * p + c)) * ch;
                    for (int cc = 0; cc < ch; ++cc) {
                        row[o++] = pixel_lut[static_cast<size_t>(cc)]
                                            [static_cast<size_t>(img[base + cc])];
                    }
                }
            }
        }
    }
    if (census) (*census)["pixel-embed"].lookups += count * np * pd;

    // patch projection onto the residual scale, plus positions and the
    // class token (already stored on that scale)
    Tensor emb_acc = int_linear_acc(patches, embed);
    gc.gemm("embed", count * np, pd, d, true);
    Tensor x = Tensor::zeros({count * n_tok, d}, Dtype::i8);
    int8_t* px_tok = x.i8();
    const int32_t* pe = emb_acc.i32();
    const int8_t* ppos = pos_q.i8();
    const int8_t* pcls = cls_q.i8();
#pragma omp parallel for schedule(static)
    for (int64_t s = 0; s < count; ++s) {
        int8_t* tok0 = px_tok + s * n_tok * d;
        for (int64_t k = 0; k < d; ++k) {
            tok0[k] = clamp_i8(static_cast<int64_t>(pcls[k]) + ppos[k]);
        }
        for (int64_t t = 0; t < np; ++t) {
            int8_t* row = tok0 + (t + 1) * d;
            const int32_t* arow = pe + (s * np + t) * d;
            const int8_t* prow = ppos + (t + 1) * d;
            for (int64_t k = 0; k < d; ++k) {
                row[k] = clamp_i8(static_cast<int64_t>(embed.rq.apply(arow[k])) + prow[k]);
            }
        }
    }
    if (census) {
        (*census)["requant"].mults += count * np * d;
        (*census)["residual"].adds += count * n_tok * d;
    }

    for (const IntBlock& blk : blocks) {
        // pre-norm attention
        Tensor h = run_int_norm(blk.norm1, x);
        gc.add("layernorm", ln_counts(count * n_tok, d));
        Tensor q = int_linear_i8(h, blk.attn.q);
        Tensor k = int_linear_i8(h, blk.attn.k);
        Tensor v = int_linear_i8(h, blk.attn.v);
        gc.gemm("qkv", count * n_tok, d, 3 * d, true);
        if (census) (*census)["requant"].mults += 3 * count * n_tok * d;

        Tensor ctx = Tensor::zeros({count * n_tok, d}, Dtype::i8);
        const int8_t* pq = q.i8();
        const int8_t* pk = k.i8();
        const int8_t* pv = v.i8();
        int8_t* pc = ctx.i8();
        const int64_t pairs = count * heads;
#pragma omp parallel for schedule(static)
        for (int64_t pair = 0; pair < pairs; ++pair) {
            const int64_t s = pair / heads;
            const int64_t off = (pair % heads) * dh;
            const int64_t base = s * n_tok;
            std::vector<int32_t> score(static_cast<size_t>(n_tok));
            std::vector<int8_t> prob(static_cast<size_t>(n_tok));
            std::vector<int64_t> acc(static_cast<size_t>(dh));
            for (int64_t i = 0; i < n_tok; ++i) {
                const int8_t* qi = pq + (base + i) * d + off;
                for (int64_t j = 0; j < n_tok; ++j) {
                    const int8_t* kj = pk + (base + j) * d + off;
                    int32_t sc = 0;
                    for (int64_t t = 0; t < dh; ++t) {
                        sc += static_cast<int32_t>(qi[t]) * kj[t];
                    }
                    score[static_cast<size_t>(j)] = sc;
                }
                int_softmax_row(score.data(), n_tok, blk.attn.sm.mult_q20, prob.data());
                std::fill(acc.begin(), acc.end(), 0);
                for (int64_t j = 0; j < n_tok; ++j) {
                    const int32_t pr = prob[static_cast<size_t>(j)];
                    if (!pr) continue;
                    const int8_t* vj = pv + (base + j) * d + off;
                    for (int64_t t = 0; t < dh; ++t) acc[static_cast<size_t>(t)] += pr * vj[t];
                }
                int8_t* crow = pc + (base + i) * d + off;
                for (int64_t t = 0; t < dh; ++t) {
                    crow[t] = blk.attn.ctx_rq.apply_i8(acc[static_cast<size_t>(t)]);
                }
            }
        }
        if (census) {
            gc.gemm("qkT", count * n_tok, d, n_tok, false);
            gc.gemm("softmaxV", count * n_tok, n_tok, d, false);
            OpCounts sm;  // per softmax element: exponent+poly+scaling multiplies
            sm.mults = 5 * count * heads * n_tok * n_tok;
            sm.adds = 3 * count * heads * n_tok * n_tok;
            sm.compares = count * heads * n_tok * n_tok;
            (*census)["shiftmax"] += sm;
            (*census)["requant"].mults += count * n_tok * d;  // context requant
        }

        // output projection back onto the residual scale
        Tensor proj_acc = int_linear_acc(ctx, blk.attn.proj);
        gc.gemm("concat", count * n_tok, d, d, true);
        const int32_t* pr = proj_acc.i32();
        Tensor xa = Tensor::zeros({count * n_tok, d}, Dtype::i8);
        int8_t* pxa = xa.i8();
        const int8_t* pxin = x.i8();
#pragma omp parallel for schedule(static)
        for (int64_t i = 0; i < count * n_tok * d; ++i) {
            pxa[i] = clamp_i8(static_cast<int64_t>(blk.attn.proj.rq.apply(pr[i])) + pxin[i]);
        }
        if (census) {
            (*census)["requant"].mults += count * n_tok * d;
            (*census)["residual"].adds += count * n_tok * d;
        }

        const int idx = static_cast<int>(&blk - blocks.data());
        x = mixer_forward(idx, xa, census);
    }

    // the head reads only the class row; layer norm is row-wise, so just
    // those rows are normalized
    Tensor cls_rows = Tensor::zeros({count, d}, Dtype::i8);
    int8_t* pcr = cls_rows.i8();
    const int8_t* pxf = x.i8();
#pragma omp parallel for schedule(static)
    for (int64_t s = 0; s < count; ++s) {
        std::memcpy(pcr + s * d, pxf + s * n_tok * d, static_cast<size_t>(d));
    }
    Tensor f = run_int_norm(final_norm, cls_rows);
    gc.add("layernorm", ln_counts(count, d));

    Tensor out = matmul(f, head_w);
    gc.gemm("head", count, d, cfg.num_classes, true);
    int32_t* po = out.i32();
#pragma omp parallel for schedule(static)
    for (int64_t s = 0; s < count; ++s) {
        int32_t* row = po + s * cfg.num_classes;
        for (int64_t c = 0; c < cfg.num_classes; ++c) {
            row[c] += head_bias[static_cast<size_t>(c)];
        }
    }
    return out;
}

std::vector<int32_t> IntModel::predict(const Dataset& ds, int64_t start, int64_t count,
                                       OpCensus* census) const {
    if (start < 0 || count < 0 || start + count > ds.size()) {
        throw UsageError("int predict: sample range out of bounds");
    }
    Tensor lg = logits(ds.sample(start), count, census);
    std::vector<int32_t> out(static_cast<size_t>(count));
    const int32_t* pl = lg.i32();
    const int64_t classes = cfg.num_classes;
    for (int64_t s = 0; s < count; ++s) {
        const int32_t* row = pl + s * classes;
        int32_t best = 0;
        for (int64_t c = 1; c < classes; ++c) {
            if (row[c] > row[best]) best = static_cast<int32_t>(c);
        }
        out[static_cast<size_t>(s)] = best;
    }
    return out;
}

IntModel quantize_model(Model& model, const Dataset& calib, int64_t calib_samples,
                        int condsum_bits) {
    if (model.needs_calibration()) {
        throw UsageError("quantize: thermometer codecs are uncalibrated; run calibrate first");
    }
    const ModelConfig& cfg = model.config();
    const int64_t total = std::min<int64_t>(calib_samples, calib.size());
    if (total <= 0) throw UsageError("quantize: calibration set is empty");
    const int64_t n_tok = cfg.tokens(), d = cfg.dim;
    const int depth = cfg.depth;

    // --- activation ranges from float passes over the calibration slice ---
    float res_mx = 0.0f, fln_mx = 0.0f;
    std::vector<float> ln1_mx(static_cast<size_t>(depth), 0.0f);
    std::vector<float> q_mx(static_cast<size_t>(depth), 0.0f);
    std::vector<float> k_mx(static_cast<size_t>(depth), 0.0f);
    std::vector<float> v_mx(static_cast<size_t>(depth), 0.0f);
    std::vector<float> ctx_mx(static_cast<size_t>(depth), 0.0f);
    std::vector<float> norm_mx(static_cast<size_t>(depth), 0.0f);
    std::vector<float> h1_mx(static_cast<size_t>(depth), 0.0f);
    std::vector<float> act_mx(static_cast<size_t>(depth), 0.0f);

    for (int64_t start = 0; start < total; start += 64) {
        const int64_t n = std::min<int64_t>(64, total - start);
        Tensor images = normalized_batch(calib, start, n);
        Tensor x = model.embed(images);
        track_max(res_mx, x);
        for (int b = 0; b < depth; ++b) {
            EncoderBlock& blk = *model.blocks()[static_cast<size_t>(b)];
            Tensor h = blk.norm1().forward(x);
            track_max(ln1_mx[static_cast<size_t>(b)], h);
            Tensor ao = blk.attention().forward(h, n, n_tok);
            track_max(q_mx[static_cast<size_t>(b)], blk.attention().cached_q());
            track_max(k_mx[static_cast<size_t>(b)], blk.attention().cached_k());
            track_max(v_mx[static_cast<size_t>(b)], blk.attention().cached_v());
            track_max(ctx_mx[static_cast<size_t>(b)], blk.attention().cached_ctx());
            add_inplace(ao, x);
            track_max(res_mx, ao);
            ChannelMixer& mx = blk.mixer();
            Tensor h2 = mx.norm().forward(ao);
            track_max(norm_mx[static_cast<size_t>(b)], h2);
            if (mx.kind() == MixerKind::mlp) {
                Tensor h1 = mx.fc1().forward(h2);
                track_max(h1_mx[static_cast<size_t>(b)], h1);
                Tensor a = gelu(h1);
                track_max(act_mx[static_cast<size_t>(b)], a);
            }
            x = mx.forward(ao);
            track_max(res_mx, x);
        }
        Tensor f = model.final_norm().forward(x);
        const float* pf = f.f32();
        for (int64_t s = 0; s < n; ++s) {  // only the class rows feed the head
            const float* row = pf + s * n_tok * d;
            for (int64_t i = 0; i < d; ++i) fln_mx = std::max(fln_mx, std::fabs(row[i]));
        }
    }

    // --- freeze the integer model ---
    IntModel im;
    im.cfg = cfg;
    im.s_res = to_scale(res_mx);

    im.s_px = 0.0f;
    for (int c = 0; c < cfg.channels; ++c) {
        const float lo = (0.0f - calib.mean[static_cast<size_t>(c)]) /
                         calib.stddev[static_cast<size_t>(c)];
        const float hi = (1.0f - calib.mean[static_cast<size_t>(c)]) /
                         calib.stddev[static_cast<size_t>(c)];
        im.s_px = std::max({im.s_px, std::fabs(lo), std::fabs(hi)});
    }
    im.s_px = to_scale(im.s_px);
    im.pixel_lut.resize(static_cast<size_t>(cfg.channels));
    for (int c = 0; c < cfg.channels; ++c) {
        for (int bb = 0; bb < 256; ++bb) {
            const float vnorm = (static_cast<float>(bb) / 255.0f - calib.mean[static_cast<size_t>(c)]) /
                                calib.stddev[static_cast<size_t>(c)];
            im.pixel_lut[static_cast<size_t>(c)][static_cast<size_t>(bb)] =
                clamp_i8(static_cast<int64_t>(std::nearbyintf(vnorm / im.s_px)));
        }
    }

    im.embed = build_int_linear(model.patch_proj().weight().value,
                                model.patch_proj().bias().value.f32(), im.s_px, im.s_res);
    im.pos_q = quantize_at(model.pos_embedding().value, im.s_res);
    im.cls_q = quantize_at(model.cls_token().value, im.s_res);

    im.blocks.resize(static_cast<size_t>(depth));
    for (int b = 0; b < depth; ++b) {
        EncoderBlock& blk = *model.blocks()[static_cast<size_t>(b)];
        IntBlock& ib = im.blocks[static_cast<size_t>(b)];
        const float s_ln1 = to_scale(ln1_mx[static_cast<size_t>(b)]);
        ib.norm1 = build_int_norm(blk.norm1().gamma().value, blk.norm1().beta().value, d, s_ln1);
        ib.norm1_out_scale = s_ln1;

        MhaLayer& att = blk.attention();
        const float s_q = to_scale(q_mx[static_cast<size_t>(b)]);
        const float s_k = to_scale(k_mx[static_cast<size_t>(b)]);
        const float s_v = to_scale(v_mx[static_cast<size_t>(b)]);
        const float s_ctx = to_scale(ctx_mx[static_cast<size_t>(b)]);
        ib.attn.q = build_int_linear(att.wq().value, att.bq().value.f32(), s_ln1, s_q);
        ib.attn.k = build_int_linear(att.wk().value, att.bk().value.f32(), s_ln1, s_k);
        ib.attn.v = build_int_linear(att.wv().value, att.bv().value.f32(), s_ln1, s_v);
        const int64_t dh = d / cfg.heads;
        ib.attn.sm.mult_q20 = std::llround(static_cast<double>(s_q) * s_k /
                                           std::sqrt(static_cast<double>(dh)) *
                                           1.4426950408889634 * 1048576.0);
        ib.attn.ctx_rq = Requant::from_ratio(static_cast<double>(s_v) / 127.0 / s_ctx);
        ib.attn.ctx_scale = s_ctx;
        ib.attn.proj = build_int_linear(att.wo().value, att.bo().value.f32(), s_ctx, im.s_res);

        ChannelMixer& mx = blk.mixer();
        const float s_norm = to_scale(norm_mx[static_cast<size_t>(b)]);
        ib.is_lut = mx.kind() == MixerKind::lut;
        if (ib.is_lut) {
            IntLutMixer& lm = ib.lut_mixer;
            lm.norm = build_int_norm(mx.norm().gamma().value, mx.norm().beta().value, d, s_norm);
            lm.norm_out_scale = s_norm;
            lm.therm_bits = mx.codec().bits;
            const Tensor& thr = mx.codec().thresholds;
            lm.thresholds_q = Tensor::zeros(thr.shape(), Dtype::i8);
            const float* pt = thr.f32();
            int8_t* pq = lm.thresholds_q.i8();
            for (int64_t i = 0; i < thr.numel(); ++i) {
                // a threshold above the int8 ceiling can never fire; one
                // below the floor always does — saturation keeps both exact
                pq[i] = static_cast<int8_t>(std::clamp<long>(
                    std::lround(pt[i] / s_norm), -128, 127));
            }
            for (const LutLayer& lut : mx.lut_layers()) {
                lm.maps.push_back(lut.mapping());
                const Tensor& lat = lut.latent().value;
                BitTensor table(lat.dim(0), lat.dim(1));
                const float* pl = lat.f32();
                for (int64_t j = 0; j < lat.dim(0); ++j) {
                    for (int64_t a = 0; a < lat.dim(1); ++a) {
                        if (pl[j * lat.dim(1) + a] >= 0.0f) table.set(j, a, true);
                    }
                }
                lm.tables.push_back(std::move(table));
            }
            QuantizedEncoded qe = quantize_encoded(mx.cond_sum().weight().value, condsum_bits,
                                                   mx.config().quant_granularity);
            lm.condsum_wq = std::move(qe.wq);
            lm.condsum_bits = condsum_bits;
            for (float s : qe.scales) {
                lm.out_rq.push_back(Requant::from_ratio(static_cast<double>(s) / im.s_res));
            }
        } else {
            IntMlpMixer& mm = ib.mlp_mixer;
            mm.norm = build_int_norm(mx.norm().gamma().value, mx.norm().beta().value, d, s_norm);
            mm.norm_out_scale = s_norm;
            const float s_h1 = to_scale(h1_mx[static_cast<size_t>(b)]);
            const float s_act = to_scale(act_mx[static_cast<size_t>(b)]);
            mm.fc1 = build_int_linear(mx.fc1().weight().value, mx.fc1().bias().value.f32(),
                                      s_norm, s_h1);
            for (int qv = -128; qv <= 127; ++qv) {
                const float g = gelu_scalar(static_cast<float>(qv) * s_h1);
                mm.gelu_lut[static_cast<size_t>(qv + 128)] =
                    clamp_i8(static_cast<int64_t>(std::nearbyintf(g / s_act)));
            }
            mm.fc2 = build_int_linear(mx.fc2().weight().value, mx.fc2().bias().value.f32(),
                                      s_act, im.s_res);
        }
    }

    const float s_fln = to_scale(fln_mx);
    im.final_norm = build_int_norm(model.final_norm().gamma().value,
                                   model.final_norm().beta().value, d, s_fln);
    im.final_norm_scale = s_fln;

    QuantizedEncoded qh = quantize_encoded(model.head().weight().value, 8);
    im.head_w = std::move(qh.wq);
    const double s_wh = qh.scales[0];
    const Tensor& hb = model.head().bias().value;
    im.head_bias.resize(static_cast<size_t>(cfg.num_classes));
    for (int64_t c = 0; c < cfg.num_classes; ++c) {
        im.head_bias[static_cast<size_t>(c)] = static_cast<int32_t>(std::clamp<long long>(
            std::llround(hb.f32()[c] / (static_cast<double>(s_fln) * s_wh)), INT32_MIN,
            INT32_MAX));
    }
    return im;
}

}  // namespace llvit
