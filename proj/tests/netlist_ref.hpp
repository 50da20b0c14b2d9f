// Builds the serial mixer evaluator from a parsed netlist JSON block --
// the "re-import" side of the export round trip, shared by the netlist
// tests and the acceptance gate.
#pragma once

#include <json.hpp>
#include <string>
#include <utility>
#include <vector>

#include "int_ref.hpp"
#include "llvit/int_infer.hpp"

namespace intref {

inline SerialLutMixer mixer_from_json(const nlohmann::json& block, int64_t dim) {
    SerialLutMixer m;
    m.dim = dim;
    m.therm_bits = block.at("therm_bits").get<int>();
    for (const auto& row : block.at("thresholds_q"))
        for (const auto& v : row) m.thresholds.push_back(static_cast<int8_t>(v.get<int>()));
    for (const auto& lj : block.at("layers")) {
        SerialLayer layer;
        layer.fan_in = lj.at("fan_in").get<int>();
        layer.input_width = lj.at("input_width").get<int64_t>();
        layer.neurons = lj.at("neurons").get<int64_t>();
        layer.map = lj.at("map").get<std::vector<int32_t>>();
        layer.table.resize(static_cast<size_t>(layer.neurons) << layer.fan_in);
        const auto& tables = lj.at("tables");
        for (int64_t j = 0; j < layer.neurons; ++j) {
            const std::string hex = tables.at(static_cast<size_t>(j)).get<std::string>();
            for (int64_t a = 0; a < (int64_t{1} << layer.fan_in); ++a) {
                const char c = hex.at(static_cast<size_t>(a / 4));
                const int nib = c <= '9' ? c - '0' : c - 'a' + 10;
                layer.table[static_cast<size_t>((j << layer.fan_in) + a)] =
                    (nib >> (a % 4)) & 1;
            }
        }
        m.layers.push_back(std::move(layer));
    }
    const auto& cs = block.at("condsum");
    for (const auto& row : cs.at("wq"))
        for (const auto& v : row) m.wq.push_back(static_cast<int8_t>(v.get<int>()));
    for (const auto& rq : cs.at("output_requant"))
        m.out_rq.push_back({rq.at("mult").get<int32_t>(), rq.at("shift").get<int>()});
    return m;
}

inline llvit::IntLayerNorm norm_from_json(const nlohmann::json& nj) {
    llvit::IntLayerNorm norm;
    norm.gamma_q = nj.at("gamma_q").get<std::vector<int16_t>>();
    norm.beta_fx = nj.at("beta_fx").get<std::vector<int64_t>>();
    for (const auto& v : nj.at("beta_out_q"))
        norm.beta_out_q.push_back(static_cast<int8_t>(v.get<int>()));
    norm.rq.mult = nj.at("requant").at("mult").get<int32_t>();
    norm.rq.shift = nj.at("requant").at("shift").get<int>();
    norm.sqrt_dim_q14 = nj.at("sqrt_dim_q14").get<int32_t>();
    return norm;
}

}  // namespace intref
