#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "llvit/model.hpp"

namespace llvit {

struct CostRow {
    int64_t params = 0;  // trainable scalar count (LUT rows count latent entries)
    int64_t macs = 0;    // multiply-accumulates per image
    int64_t bytes = 0;   // deployed footprint under the byte model below
};

// Deployed byte model: int8 dense weights, narrow (default int4) encoded
// values, 1 bit per LUT truth-table entry, int8 thermometer thresholds
// (the thresholds ship pre-quantized to the activation scale, exactly as the
// integer inference path consumes them). Biases/norms are excluded from the
// byte model (folded into requantization constants on device).
struct CostReport {
    // row keys: qkv, qkT, softmaxV, concat, ff1, ff2, lut-mixer, embed, head
    std::map<std::string, CostRow> rows;
    int64_t depth = 0, tokens = 0, dim = 0;  // geometry, for ratio guards

    CostRow encoder_total() const;   // attention + mixer rows only
    CostRow full_total() const;      // + embed and head
    int64_t encoder_adds() const;    // cond-sum additions (lut mixer)

    // extra (non-row) accounting
    int64_t bias_norm_params = 0;    // biases + norm affine params, full model
    int64_t condsum_adds = 0;        // per image, lut mixer only
    int64_t requant_mults = 0;       // per image, one per mixer output element
};

CostReport cost_report(const ModelConfig& cfg);

struct ReductionSummary {
    double weight_reduction_bytes = 0.0;   // 1 - ours/baseline, encoder scope
    double weight_reduction_params = 0.0;
    double mac_reduction = 0.0;            // requant multiplies counted as ours
    double ours_encoder_mib = 0.0;
    double baseline_encoder_mib = 0.0;
};

// Both reports must share (depth, tokens, dim); throws UsageError otherwise.
ReductionSummary reduction_summary(const CostReport& ours, const CostReport& baseline);

// Share of the mixer family in the full model (params incl. biases, MACs
// incl. embed and head) — the "how much do the MLPs cost" headline numbers.
struct MixerShare {
    double param_share = 0.0;
    double mac_share = 0.0;
};
MixerShare mixer_share(const ModelConfig& cfg);

// Whole-model MAC accounting under two conventions: multiplications only,
// and with the cond-sum additions counted as MAC-equivalents.
struct GmacSummary {
    double encoder_gmacs = 0.0;
    double model_gmacs = 0.0;               // + embed + head
    double model_gmacs_with_adds = 0.0;     // cond-sum adds counted as MACs
};
GmacSummary gmac_summary(const ModelConfig& cfg);

std::string cost_report_text(const CostReport& rep);
std::string cost_report_csv(const CostReport& rep);

}  // namespace llvit
