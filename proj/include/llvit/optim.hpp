#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "llvit/layers.hpp"
#include "llvit/tensor.hpp"

namespace llvit {

enum class OptKind { sgd_momentum, adamw };

OptKind opt_kind_from_name(const std::string& name);
std::string opt_kind_name(OptKind kind);

struct OptimizerConfig {
    OptKind kind = OptKind::adamw;
    float lr = 5e-4f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
    float weight_decay = 0.05f;  // decoupled, applied to decayable params only
    float momentum = 0.9f;
};

// Cosine decay from `base` down to `base * min_frac` over `total` epochs,
// evaluated as a pure function of the (0-based) epoch index.
float cosine_lr(float base, float min_frac, int epoch, int total);

class Optimizer {
  public:
    explicit Optimizer(OptimizerConfig cfg) : cfg_(cfg) {}

    // Applies one update with the given learning rate, then zeroes all grads.
    // Throws TrainingError naming the offending parameter if a gradient
    // contains a NaN or infinity.
    void step(const std::vector<Parameter*>& params, float lr);

    int64_t step_count() const { return step_count_; }
    const OptimizerConfig& config() const { return cfg_; }

    // State access for checkpointing (keyed "m.<param>" / "v.<param>" for
    // adamw, "v.<param>" for sgd momentum).
    std::map<std::string, Tensor>& state() { return state_; }
    const std::map<std::string, Tensor>& state() const { return state_; }
    void set_step_count(int64_t n) { step_count_ = n; }

  private:
    OptimizerConfig cfg_;
    int64_t step_count_ = 0;
    std::map<std::string, Tensor> state_;
};

}  // namespace llvit
