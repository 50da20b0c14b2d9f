#pragma once

#include <cstdint>
#include <vector>

#include "llvit/data.hpp"
#include "llvit/model.hpp"
#include "llvit/optim.hpp"

namespace llvit {

struct EpochMetrics {
    double loss = 0.0;
    double accuracy = 0.0;
};

// One shuffled pass; throws TrainingError naming the first offending stage
// if the loss goes non-finite.
EpochMetrics train_epoch(Model& model, const Dataset& train, Optimizer& opt, float lr,
                         int64_t batch_size, uint64_t seed, int64_t epoch, bool augment);

struct EvalResult {
    double accuracy = 0.0;
    std::vector<int64_t> per_class_correct, per_class_total;
    std::vector<int32_t> predictions;  // aligned with dataset order
};

EvalResult evaluate(Model& model, const Dataset& ds, int64_t batch_size);

std::vector<int32_t> argmax_rows(const Tensor& logits);

}  // namespace llvit
