#pragma once

#include <string>

#include "llvit/int_infer.hpp"

namespace llvit {

// Deployable description of every LUT channel mixer in the model, as JSON:
// per block, the int8 thermometer thresholds, per-LUT-layer fan-in /
// mappings / binarized truth tables (hex, LSB-first addressing: hex digit k
// covers addresses 4k..4k+3, value bit a-4k), the narrow conditional-
// summation matrix with its scales and output requant constants, and the
// mixer-side normalization constants. The run config and tool version are
// embedded so the file is self-describing. Output bytes are deterministic
// for a fixed model.
std::string netlist_json(const IntModel& im, const std::string& config_json);

// Hex serialization of one truth-table row of 2^n bits (2^n / 4 digits).
std::string truth_table_hex(const BitTensor& table, int64_t row);

}  // namespace llvit
