#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "llvit/config_io.hpp"
#include "llvit/model.hpp"
#include "llvit/optim.hpp"
#include "llvit/tensor.hpp"

namespace llvit {

// Checkpoint container: 8-byte magic "LLVITCK1", a little-endian uint64
// header length, a JSON header (version, embedded run config, epoch/metric
// bookkeeping, tensor manifest), then the raw little-endian tensor payloads
// back to back in manifest order. Tensors cover every trainable parameter,
// the frozen thermometer thresholds ("blockN.mixer.therm.thresholds"), and
// optimizer state ("opt.m.<param>" / "opt.v.<param>").
struct Checkpoint {
    std::string version;
    std::string config_json;  // canonical RunConfig JSON
    int epoch = 0;            // last completed epoch (0-based), -1 if untrained
    double best_acc = 0.0;
    std::string opt_kind;  // empty when no optimizer state is stored
    int64_t opt_step = 0;
    std::map<std::string, Tensor> tensors;
};

void save_checkpoint(const std::string& path, const RunConfig& rc, Model& model,
                     const Optimizer* opt, int epoch, double best_acc);

Checkpoint load_checkpoint(const std::string& path);  // FormatError / IoError

RunConfig checkpoint_config(const Checkpoint& ck);

// Copies parameter tensors (and thermometer thresholds, if present) into a
// model built from the same config; shape mismatches raise FormatError.
void restore_model(Model& model, const Checkpoint& ck);

void restore_optimizer(Optimizer& opt, const Checkpoint& ck);

}  // namespace llvit
