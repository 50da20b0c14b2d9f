#pragma once

#include <cstdint>
#include <string>

#include "llvit/model.hpp"
#include "llvit/optim.hpp"
#include "llvit/perf_model.hpp"

namespace llvit {

// Everything a run needs, serializable to/from JSON. The config is embedded
// verbatim in checkpoints, reports and netlists so every artifact is
// self-describing.
struct RunConfig {
    ModelConfig model;
    OptimizerConfig opt;
    float lr_min_frac = 0.1f;  // cosine schedule floor, as a fraction of lr
    HwConfig hw;

    std::string dataset = "synth-digits";
    std::string data_root;  // empty -> $LLVIT_DATA_ROOT -> "data"
    std::string out_dir = "runs/default";
    int epochs = 30;
    int64_t batch_size = 64;
    bool augment = true;
    int64_t calib_samples = 512;  // thermometer + quantization calibration
    uint64_t seed = 42;           // mirrored into model.seed

    void validate() const;  // throws ConfigError with the offending field path
};

// Strict parse: unknown keys and wrong types raise ConfigError naming the
// full field path (e.g. "model.mixer.fan_in").
RunConfig run_config_from_json(const std::string& text);
RunConfig load_run_config(const std::string& path);  // IoError if unreadable

// Canonical serialization (sorted keys, stable float formatting); parsing it
// back yields an identical config.
std::string run_config_to_json(const RunConfig& rc);

}  // namespace llvit
