#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "llvit/errors.hpp"
#include "llvit/optim.hpp"
#include "test_util.hpp"

using namespace llvit;

namespace {

Parameter scalar_param(const std::string& name, float w, float g, bool decay = true,
                       float lr_scale = 1.0f) {
    Parameter p(name, Tensor::full({1}, w), decay, lr_scale);
    p.grad.f32()[0] = g;
    return p;
}

}  // namespace

TEST_CASE("adamw first step matches the hand-computed update") {
    OptimizerConfig cfg;  // defaults: lr 5e-4, b1 .9, b2 .999, eps 1e-8, wd .05
    Optimizer opt(cfg);
    Parameter p = scalar_param("w", 1.0f, 0.5f);
    opt.step({&p}, 0.1f);
    // m=0.05, v=2.5e-4; bias-corrected mhat=0.5, vhat=0.25;
    // w -= 0.1 * (0.5/(0.5+1e-8) + 0.05*1)
    CHECK(p.value.f32()[0] == doctest::Approx(0.895).epsilon(1e-6));
    CHECK(p.grad.f32()[0] == 0.0f);  // grads cleared by the step
    CHECK(opt.step_count() == 1);
}

TEST_CASE("adamw skips weight decay on non-decayable parameters") {
    OptimizerConfig cfg;
    Optimizer opt(cfg);
    Parameter p = scalar_param("b", 1.0f, 0.5f, /*decay=*/false);
    opt.step({&p}, 0.1f);
    CHECK(p.value.f32()[0] == doctest::Approx(0.9).epsilon(1e-6));
}

TEST_CASE("per-parameter learning-rate scale multiplies the step") {
    OptimizerConfig cfg;
    Optimizer opt(cfg);
    Parameter p = scalar_param("latent", 1.0f, 0.5f, /*decay=*/false, /*lr_scale=*/10.0f);
    opt.step({&p}, 0.1f);
    CHECK(p.value.f32()[0] == doctest::Approx(0.0).epsilon(1e-5));  // 1 - 10*0.1*1.0
}

TEST_CASE("sgd with momentum accumulates velocity") {
    OptimizerConfig cfg;
    cfg.kind = OptKind::sgd_momentum;
    cfg.momentum = 0.9f;
    Optimizer opt(cfg);
    Parameter p = scalar_param("w", 1.0f, 0.5f, /*decay=*/false);
    opt.step({&p}, 0.1f);
    CHECK(p.value.f32()[0] == doctest::Approx(0.95).epsilon(1e-6));  // v=0.5
    p.grad.f32()[0] = 0.5f;
    opt.step({&p}, 0.1f);
    CHECK(p.value.f32()[0] == doctest::Approx(0.855).epsilon(1e-6));  // v=0.95
}

TEST_CASE("optimizer state is keyed per parameter and persists") {
    OptimizerConfig cfg;
    Optimizer opt(cfg);
    Parameter p = scalar_param("w", 1.0f, 0.5f);
    opt.step({&p}, 0.1f);
    REQUIRE(opt.state().count("m.w") == 1);
    REQUIRE(opt.state().count("v.w") == 1);
    CHECK(opt.state().at("m.w").f32()[0] == doctest::Approx(0.05).epsilon(1e-6));
    CHECK(opt.state().at("v.w").f32()[0] == doctest::Approx(2.5e-4).epsilon(1e-6));
}

TEST_CASE("a non-finite gradient aborts the step with a named parameter") {
    OptimizerConfig cfg;
    Optimizer opt(cfg);
    Parameter p = scalar_param("block0.attn.wq", 1.0f, std::nanf(""));
    try {
        opt.step({&p}, 0.1f);
        FAIL("expected TrainingError");
    } catch (const TrainingError& e) {
        CHECK(std::string(e.what()).find("block0.attn.wq") != std::string::npos);
    }
    CHECK(p.value.f32()[0] == 1.0f);  // no partial update applied
}

TEST_CASE("cosine schedule: endpoints, floor, and monotone decay") {
    const float base = 1.0f, floor_frac = 0.1f;
    const int total = 30;
    CHECK(cosine_lr(base, floor_frac, 0, total) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(cosine_lr(base, floor_frac, total - 1, total) == doctest::Approx(0.1).epsilon(1e-6));
    float prev = 2.0f;
    for (int e = 0; e < total; ++e) {
        const float lr = cosine_lr(base, floor_frac, e, total);
        CHECK(lr <= prev);
        CHECK(lr >= 0.1f - 1e-6f);
        CHECK(lr <= 1.0f + 1e-6f);
        prev = lr;
    }
    // halfway symmetry of the cosine: lr(e) + lr(total-1-e) is constant
    for (int e = 0; e < total / 2; ++e) {
        const float sum = cosine_lr(base, floor_frac, e, total) +
                          cosine_lr(base, floor_frac, total - 1 - e, total);
        CHECK(sum == doctest::Approx(1.1).epsilon(1e-5));
    }
    // degenerate one-epoch schedule just uses the base rate
    CHECK(cosine_lr(base, floor_frac, 0, 1) == base);
}
