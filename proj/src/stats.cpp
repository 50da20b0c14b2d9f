#include "llvit/stats.hpp"

#include <cstdio>
#include <sstream>

#include "llvit/errors.hpp"

namespace llvit {

namespace {

const char* kRowOrder[] = {"qkv", "qkT", "softmaxV", "concat", "ff1",
                           "ff2", "lut-mixer", "embed", "head"};

}  // namespace

CostRow CostReport::encoder_total() const {
    CostRow t;
    for (const auto& [key, row] : rows) {
        if (key == "embed" || key == "head") continue;
        t.params += row.params;
        t.macs += row.macs;
        t.bytes += row.bytes;
    }
    return t;
}

CostRow CostReport::full_total() const {
    CostRow t;
    for (const auto& [key, row] : rows) {
        t.params += row.params;
        t.macs += row.macs;
        t.bytes += row.bytes;
    }
    return t;
}

int64_t CostReport::encoder_adds() const { return condsum_adds; }

CostReport cost_report(const ModelConfig& cfg) {
    cfg.validate();
    CostReport rep;
    const int64_t l = cfg.depth;
    const int64_t n = cfg.tokens();
    const int64_t d = cfg.dim;
    rep.depth = l;
    rep.tokens = n;
    rep.dim = d;

    // attention family (weights int8 in the byte model)
    rep.rows["qkv"] = {3 * l * d * d, 3 * l * n * d * d, 3 * l * d * d};
    rep.rows["qkT"] = {0, l * n * n * d, 0};
    rep.rows["softmaxV"] = {0, l * n * n * d, 0};
    rep.rows["concat"] = {l * d * d, l * n * d * d, l * d * d};

    int64_t bias_norm = 4 * l * d /*attention biases*/ + 2 * 2 * l * d /*two norms per block*/ +
                        2 * d /*final norm*/;

    if (cfg.mixer.kind == MixerKind::mlp) {
        const int64_t hidden = cfg.mixer.hidden_ratio * d;
        rep.rows["ff1"] = {l * d * hidden, l * n * d * hidden, l * d * hidden};
        rep.rows["ff2"] = {l * hidden * d, l * n * hidden * d, l * hidden * d};
        rep.rows["lut-mixer"] = {0, 0, 0};
        bias_norm += l * (hidden + d);
    } else {
        const MixerParamCount mc = mixer_param_count(cfg.mixer, d);
        const int64_t latent = l * mc.latent_entries;
        const int64_t encoded = l * mc.encoded_values;
        const int64_t thresholds = l * mc.thresholds;
        // 1 bit per truth-table entry, int4 encoded values, int8 thresholds
        const int64_t bytes = latent / 8 + encoded / 2 + thresholds;
        rep.rows["ff1"] = {0, 0, 0};
        rep.rows["ff2"] = {0, 0, 0};
        rep.rows["lut-mixer"] = {latent + encoded + thresholds, 0, bytes};
        rep.condsum_adds = l * n * d * cfg.mixer.widths.back();
        rep.requant_mults = l * n * d;
    }

    const int64_t pd = cfg.patch_dim();
    const int64_t np = cfg.num_patches();
    // embed row: projection + positional embedding + class token
    rep.rows["embed"] = {pd * d + n * d + d, np * pd * d, pd * d + n * d + d};
    rep.rows["head"] = {d * cfg.num_classes, d * cfg.num_classes, d * cfg.num_classes};
    bias_norm += d /*embed bias*/ + cfg.num_classes /*head bias*/;
    rep.bias_norm_params = bias_norm;
    return rep;
}

ReductionSummary reduction_summary(const CostReport& ours, const CostReport& baseline) {
    if (ours.depth != baseline.depth || ours.tokens != baseline.tokens ||
        ours.dim != baseline.dim) {
        throw UsageError("reduction summary: reports have different geometry");
    }
    const CostRow a = ours.encoder_total();
    const CostRow b = baseline.encoder_total();
    ReductionSummary s;
    s.weight_reduction_bytes =
        1.0 - static_cast<double>(a.bytes) / static_cast<double>(b.bytes);
    s.weight_reduction_params =
        1.0 - static_cast<double>(a.params) / static_cast<double>(b.params);
    s.mac_reduction = 1.0 - static_cast<double>(a.macs + ours.requant_mults) /
                                static_cast<double>(b.macs + baseline.requant_mults);
    s.ours_encoder_mib = static_cast<double>(a.bytes) / (1024.0 * 1024.0);
    s.baseline_encoder_mib = static_cast<double>(b.bytes) / (1024.0 * 1024.0);
    return s;
}

MixerShare mixer_share(const ModelConfig& cfg) {
    CostReport rep = cost_report(cfg);
    const CostRow full = rep.full_total();
    const int64_t mixer_params = rep.rows["ff1"].params + rep.rows["ff2"].params +
                                 rep.rows["lut-mixer"].params;
    const int64_t mixer_biases =
        cfg.mixer.kind == MixerKind::mlp
            ? static_cast<int64_t>(cfg.depth) * (cfg.mixer.hidden_ratio + 1) * cfg.dim
            : 0;
    const int64_t mixer_macs = rep.rows["ff1"].macs + rep.rows["ff2"].macs;
    MixerShare share;
    share.param_share =
        static_cast<double>(mixer_params + mixer_biases) /
        static_cast<double>(full.params + rep.bias_norm_params);
    share.mac_share = static_cast<double>(mixer_macs) / static_cast<double>(full.macs);
    return share;
}

GmacSummary gmac_summary(const ModelConfig& cfg) {
    CostReport rep = cost_report(cfg);
    GmacSummary g;
    const double enc = static_cast<double>(rep.encoder_total().macs + rep.requant_mults);
    const double extra =
        static_cast<double>(rep.rows["embed"].macs + rep.rows["head"].macs);
    g.encoder_gmacs = enc / 1e9;
    g.model_gmacs = (enc + extra) / 1e9;
    g.model_gmacs_with_adds = (enc + extra + static_cast<double>(rep.condsum_adds)) / 1e9;
    return g;
}

std::string cost_report_text(const CostReport& rep) {
    std::ostringstream out;
    out << "layer family        params           MACs          bytes\n";
    const auto line = [&](const std::string& name, const CostRow& row) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "%-14s %12lld %14lld %14lld\n", name.c_str(),
                      static_cast<long long>(row.params), static_cast<long long>(row.macs),
                      static_cast<long long>(row.bytes));
        out << buf;
    };
    for (const char* key : kRowOrder) {
        auto it = rep.rows.find(key);
        if (it != rep.rows.end()) line(key, it->second);
    }
    line("encoder-total", rep.encoder_total());
    line("full-total", rep.full_total());
    if (rep.condsum_adds > 0) {
        out << "cond-sum additions/image: " << rep.condsum_adds
            << "   requant multiplies/image: " << rep.requant_mults << "\n";
    }
    out << "bias+norm params (excluded from rows): " << rep.bias_norm_params << "\n";
    return out.str();
}

std::string cost_report_csv(const CostReport& rep) {
    std::ostringstream out;
    out << "family,params,macs,bytes\n";
    for (const char* key : kRowOrder) {
        auto it = rep.rows.find(key);
        if (it == rep.rows.end()) continue;
        out << key << "," << it->second.params << "," << it->second.macs << ","
            << it->second.bytes << "\n";
    }
    return out.str();
}

}  // namespace llvit
