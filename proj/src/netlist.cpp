#include "llvit/netlist.hpp"

#include <json.hpp>

#include "llvit/errors.hpp"
#include "llvit/version.hpp"

namespace llvit {

namespace {

using nlohmann::json;

json requant_json(const Requant& rq) { return {{"mult", rq.mult}, {"shift", rq.shift}}; }

json norm_json(const IntLayerNorm& ln) {
    json j;
    j["gamma_q"] = ln.gamma_q;
    j["beta_fx"] = ln.beta_fx;
    j["beta_out_q"] = json::array();
    for (int8_t b : ln.beta_out_q) j["beta_out_q"].push_back(static_cast<int>(b));
    j["requant"] = requant_json(ln.rq);
    j["sqrt_dim_q14"] = ln.sqrt_dim_q14;
    return j;
}

}  // namespace

std::string truth_table_hex(const BitTensor& table, int64_t row) {
    const int64_t width = table.width();
    std::string out(static_cast<size_t>(width / 4), '0');
    static const char* kDigits = "0123456789abcdef";
    for (int64_t k = 0; k < width / 4; ++k) {
        int nib = 0;
        for (int b = 0; b < 4; ++b) {
            if (table.get(row, 4 * k + b)) nib |= 1 << b;
        }
        out[static_cast<size_t>(k)] = kDigits[nib];
    }
    return out;
}

std::string netlist_json(const IntModel& im, const std::string& config_json) {
    json j;
    j["version"] = kToolVersion;
    j["config"] = json::parse(config_json);
    j["residual_scale"] = im.s_res;
    j["dim"] = im.cfg.dim;

    json blocks = json::array();
    for (size_t bi = 0; bi < im.blocks.size(); ++bi) {
        const IntBlock& blk = im.blocks[bi];
        if (!blk.is_lut) {
            throw UsageError("netlist export: block " + std::to_string(bi) +
                             " has an mlp mixer; nothing to export");
        }
        const IntLutMixer& mx = blk.lut_mixer;
        json b;
        b["block"] = bi;
        b["norm"] = norm_json(mx.norm);
        b["norm_out_scale"] = mx.norm_out_scale;
        b["therm_bits"] = mx.therm_bits;

        json thr = json::array();
        const int8_t* pt = mx.thresholds_q.i8();
        for (int64_t d = 0; d < mx.thresholds_q.dim(0); ++d) {
            json row = json::array();
            for (int64_t k = 0; k < mx.thresholds_q.dim(1); ++k) {
                row.push_back(static_cast<int>(pt[d * mx.thresholds_q.dim(1) + k]));
            }
            thr.push_back(std::move(row));
        }
        b["thresholds_q"] = std::move(thr);

        json layers = json::array();
        for (size_t l = 0; l < mx.maps.size(); ++l) {
            const LutMapping& map = mx.maps[l];
            json lj;
            lj["fan_in"] = map.fan_in;
            lj["input_width"] = map.input_width;
            lj["neurons"] = map.neurons;
            lj["map"] = map.map;
            json tables = json::array();
            for (int64_t n = 0; n < map.neurons; ++n) {
                tables.push_back(truth_table_hex(mx.tables[l], n));
            }
            lj["tables"] = std::move(tables);
            layers.push_back(std::move(lj));
        }
        b["layers"] = std::move(layers);

        json cs;
        cs["bits"] = mx.condsum_bits;
        cs["granularity"] = mx.out_rq.size() > 1 ? "per-channel" : "per-layer";
        json rows = json::array();
        const int8_t* pw = mx.condsum_wq.i8();
        const int64_t jd = mx.condsum_wq.dim(0), jj = mx.condsum_wq.dim(1);
        for (int64_t d = 0; d < jd; ++d) {
            json row = json::array();
            for (int64_t k = 0; k < jj; ++k) row.push_back(static_cast<int>(pw[d * jj + k]));
            rows.push_back(std::move(row));
        }
        cs["wq"] = std::move(rows);
        json rqs = json::array();
        for (const Requant& rq : mx.out_rq) rqs.push_back(requant_json(rq));
        cs["output_requant"] = std::move(rqs);
        b["condsum"] = std::move(cs);

        blocks.push_back(std::move(b));
    }
    j["blocks"] = std::move(blocks);
    return j.dump(2);
}

}  // namespace llvit
