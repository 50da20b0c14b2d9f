#pragma once

// Serial, struct-of-plain-vectors re-implementation of the integer LUT
// mixer. Used as the independent oracle for the packed/OpenMP implementation
// and as the "re-import" evaluator for exported netlists: both tests reduce
// to building this struct (from the in-memory model or from the JSON file)
// and demanding bit-exact agreement.

#include <cstdint>
#include <vector>

#include "llvit/int_infer.hpp"

namespace intref {

struct SerialLayer {
    int fan_in = 0;
    int64_t input_width = 0;
    int64_t neurons = 0;
    std::vector<int32_t> map;     // [neurons * fan_in]
    std::vector<uint8_t> table;   // bit per (neuron, address): [neurons << fan_in]
};

struct SerialRequant {
    int32_t mult = 0;
    int shift = 0;
};

struct SerialLutMixer {
    int64_t dim = 0;
    int therm_bits = 0;
    std::vector<int8_t> thresholds;  // [dim * therm_bits]
    std::vector<SerialLayer> layers;
    std::vector<int8_t> wq;          // [dim * last_neurons]
    std::vector<SerialRequant> out_rq;  // 1 or dim entries
};

// round-half-away-from-zero right shift, the fixed-point rounding rule used
// throughout the integer path
inline int64_t serial_shr_round(__int128 v, int k) {
    if (k <= 0) return static_cast<int64_t>(v << -k);
    const __int128 half = static_cast<__int128>(1) << (k - 1);
    if (v >= 0) return static_cast<int64_t>((v + half) >> k);
    return static_cast<int64_t>(-((-v + half) >> k));
}

inline int32_t serial_requant(const SerialRequant& rq, int64_t v) {
    return static_cast<int32_t>(serial_shr_round(static_cast<__int128>(v) * rq.mult, rq.shift));
}

// thermometer -> LUT cascade -> conditional summation for one normalized
// int8 token row; plain loops, byte-wide bit storage
inline std::vector<int32_t> serial_mixer_core(const SerialLutMixer& m, const int8_t* h) {
    std::vector<uint8_t> bits(static_cast<size_t>(m.dim) * m.therm_bits, 0);
    for (int64_t f = 0; f < m.dim; ++f) {
        for (int j = 0; j < m.therm_bits; ++j) {
            bits[static_cast<size_t>(f * m.therm_bits + j)] =
                h[f] > m.thresholds[static_cast<size_t>(f * m.therm_bits + j)] ? 1 : 0;
        }
    }
    for (const SerialLayer& layer : m.layers) {
        std::vector<uint8_t> next(static_cast<size_t>(layer.neurons), 0);
        for (int64_t j = 0; j < layer.neurons; ++j) {
            int addr = 0;
            for (int i = 0; i < layer.fan_in; ++i) {
                addr |= static_cast<int>(bits[static_cast<size_t>(
                            layer.map[static_cast<size_t>(j * layer.fan_in + i)])])
                        << i;
            }
            next[static_cast<size_t>(j)] =
                layer.table[static_cast<size_t>((j << layer.fan_in) + addr)];
        }
        bits = std::move(next);
    }
    const int64_t jlast = m.layers.back().neurons;
    std::vector<int32_t> acc(static_cast<size_t>(m.dim), 0);
    for (int64_t j = 0; j < jlast; ++j) {
        if (!bits[static_cast<size_t>(j)]) continue;
        for (int64_t ch = 0; ch < m.dim; ++ch) {
            acc[static_cast<size_t>(ch)] += m.wq[static_cast<size_t>(ch * jlast + j)];
        }
    }
    return acc;
}

// one requantized sublayer contribution plus the residual add and clamp
inline int8_t serial_mixer_output(const SerialLutMixer& m, int64_t channel, int32_t acc,
                                  int8_t residual) {
    const SerialRequant& rq =
        m.out_rq.size() > 1 ? m.out_rq[static_cast<size_t>(channel)] : m.out_rq[0];
    const int64_t v = static_cast<int64_t>(serial_requant(rq, acc)) + residual;
    if (v > 127) return 127;
    if (v < -127) return -127;
    return static_cast<int8_t>(v);
}

// build the serial mirror straight from the packed in-memory model
inline SerialLutMixer from_int_model(const llvit::IntModel& im, int block_index) {
    const llvit::IntLutMixer& mx = im.blocks[static_cast<size_t>(block_index)].lut_mixer;
    SerialLutMixer m;
    m.dim = im.cfg.dim;
    m.therm_bits = mx.therm_bits;
    m.thresholds.assign(mx.thresholds_q.i8(), mx.thresholds_q.i8() + mx.thresholds_q.numel());
    for (size_t l = 0; l < mx.maps.size(); ++l) {
        SerialLayer layer;
        layer.fan_in = mx.maps[l].fan_in;
        layer.input_width = mx.maps[l].input_width;
        layer.neurons = mx.maps[l].neurons;
        layer.map = mx.maps[l].map;
        layer.table.resize(static_cast<size_t>(layer.neurons) << layer.fan_in);
        for (int64_t j = 0; j < layer.neurons; ++j)
            for (int64_t a = 0; a < (int64_t{1} << layer.fan_in); ++a)
                layer.table[static_cast<size_t>((j << layer.fan_in) + a)] =
                    mx.tables[l].get(j, a) ? 1 : 0;
        m.layers.push_back(std::move(layer));
    }
    m.wq.assign(mx.condsum_wq.i8(), mx.condsum_wq.i8() + mx.condsum_wq.numel());
    for (const llvit::Requant& rq : mx.out_rq) m.out_rq.push_back({rq.mult, rq.shift});
    return m;
}

}  // namespace intref
