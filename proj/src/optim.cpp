#include "llvit/optim.hpp"

#include <cmath>

#include "llvit/errors.hpp"

namespace llvit {

OptKind opt_kind_from_name(const std::string& name) {
    if (name == "adamw") return OptKind::adamw;
    if (name == "sgd") return OptKind::sgd_momentum;
    throw ConfigError("unknown optimizer: " + name);
}

std::string opt_kind_name(OptKind kind) {
    return kind == OptKind::adamw ? "adamw" : "sgd";
}

float cosine_lr(float base, float min_frac, int epoch, int total) {
    if (total <= 1) return base;
    const double t = static_cast<double>(epoch) / static_cast<double>(total - 1);
    const double w = 0.5 * (1.0 + std::cos(t * 3.14159265358979323846));
    return static_cast<float>(base * (min_frac + (1.0 - min_frac) * w));
}

namespace {

void check_finite(const Parameter& p) {
    const float* g = p.grad.f32();
    for (int64_t i = 0; i < p.grad.numel(); ++i) {
        if (!std::isfinite(g[i])) {
            throw TrainingError("non-finite gradient in parameter '" + p.name + "'");
        }
    }
}

}  // namespace

void Optimizer::step(const std::vector<Parameter*>& params, float lr) {
    ++step_count_;
    for (Parameter* p : params) check_finite(*p);

    for (Parameter* p : params) {
        const float lr_p = lr * p->lr_scale;
        const int64_t n = p->value.numel();
        float* w = p->value.f32();
        const float* g = p->grad.f32();

        if (cfg_.kind == OptKind::adamw) {
            Tensor& m = state_.try_emplace("m." + p->name, Tensor::zeros(p->value.shape(), Dtype::f32)).first->second;
            Tensor& v = state_.try_emplace("v." + p->name, Tensor::zeros(p->value.shape(), Dtype::f32)).first->second;
            float* pm = m.f32();
            float* pv = v.f32();
            const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
            const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
            const float wd = p->decayable ? cfg_.weight_decay : 0.0f;
#pragma omp parallel for schedule(static)
            for (int64_t i = 0; i < n; ++i) {
                pm[i] = cfg_.beta1 * pm[i] + (1.0f - cfg_.beta1) * g[i];
                pv[i] = cfg_.beta2 * pv[i] + (1.0f - cfg_.beta2) * g[i] * g[i];
                const float mhat = static_cast<float>(pm[i] / bc1);
                const float vhat = static_cast<float>(pv[i] / bc2);
                w[i] -= lr_p * (mhat / (std::sqrt(vhat) + cfg_.eps) + wd * w[i]);
            }
        } else {
            Tensor& v = state_.try_emplace("v." + p->name, Tensor::zeros(p->value.shape(), Dtype::f32)).first->second;
            float* pv = v.f32();
            const float wd = p->decayable ? cfg_.weight_decay : 0.0f;
#pragma omp parallel for schedule(static)
            for (int64_t i = 0; i < n; ++i) {
                pv[i] = cfg_.momentum * pv[i] + g[i] + wd * w[i];
                w[i] -= lr_p * pv[i];
            }
        }
        p->grad.zero();
    }
}

}  // namespace llvit
