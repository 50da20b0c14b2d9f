#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "llvit/layers.hpp"
#include "llvit/ops.hpp"
#include "llvit/ref_ops.hpp"
#include "llvit/rng.hpp"
#include "llvit/threading.hpp"
#include "test_util.hpp"

using namespace llvit;
using testutil::central_diff;
using testutil::grad_close;
using testutil::max_abs_diff;
using testutil::random_tensor;
using testutil::transpose2d;

TEST_CASE("matmul matches the serial reference on awkward shapes") {
    Rng rng(11);
    for (auto [m, k, p] : {std::tuple{1, 1, 1}, {7, 13, 5}, {33, 17, 9}, {64, 3, 64}}) {
        Tensor a = random_tensor(rng, {m, k}, -2.0f, 2.0f);
        Tensor b = random_tensor(rng, {k, p}, -2.0f, 2.0f);
        Tensor got = matmul(a, b);
        Tensor want = ref::matmul(a, b);
        CHECK(got.shape() == want.shape());
        CHECK(max_abs_diff(got, want) <= 1e-5f);
    }
}

TEST_CASE("matmul_nt equals matmul against the explicit transpose") {
    Rng rng(12);
    Tensor a = random_tensor(rng, {9, 14});
    Tensor b = random_tensor(rng, {6, 14});  // [P, K]
    Tensor got = matmul_nt(a, b);
    Tensor want = ref::matmul(a, transpose2d(b));
    CHECK(max_abs_diff(got, want) <= 1e-5f);
}

TEST_CASE("matmul_tn equals matmul against the explicit transpose") {
    Rng rng(13);
    Tensor a = random_tensor(rng, {14, 9});  // [K, M]
    Tensor b = random_tensor(rng, {14, 6});
    Tensor got = matmul_tn(a, b);
    Tensor want = ref::matmul(transpose2d(a), b);
    CHECK(max_abs_diff(got, want) <= 1e-5f);
}

TEST_CASE("int8 matmul accumulates exactly in int32") {
    Tensor a = Tensor::zeros({2, 3}, Dtype::i8);
    Tensor b = Tensor::zeros({3, 2}, Dtype::i8);
    const int8_t av[] = {1, -2, 3, 127, -128, 5};
    const int8_t bv[] = {10, -1, 7, 2, -3, 100};
    std::copy(av, av + 6, a.i8());
    std::copy(bv, bv + 6, b.i8());
    Tensor c = matmul(a, b);
    REQUIRE(c.dtype() == Dtype::i32);
    // hand-computed
    CHECK(c.i32()[0] == 1 * 10 + (-2) * 7 + 3 * (-3));
    CHECK(c.i32()[1] == 1 * (-1) + (-2) * 2 + 3 * 100);
    CHECK(c.i32()[2] == 127 * 10 + (-128) * 7 + 5 * (-3));
    CHECK(c.i32()[3] == 127 * (-1) + (-128) * 2 + 5 * 100);
}

TEST_CASE("layernorm forward matches reference and normalizes rows") {
    Rng rng(14);
    Tensor x = random_tensor(rng, {5, 19}, -3.0f, 3.0f);
    Tensor gamma = random_tensor(rng, {19}, 0.5f, 1.5f);
    Tensor beta = random_tensor(rng, {19}, -0.5f, 0.5f);
    Tensor got = layernorm_forward(x, gamma, beta, 1e-6f);
    Tensor want = ref::layernorm_forward(x, gamma, beta, 1e-6f);
    CHECK(max_abs_diff(got, want) <= 1e-5f);

    // with identity affine, rows come out zero-mean unit-variance
    Tensor ones = Tensor::full({19}, 1.0f);
    Tensor zeros = Tensor::zeros({19});
    Tensor y = layernorm_forward(x, ones, zeros, 0.0f);
    for (int64_t r = 0; r < 5; ++r) {
        double mean = 0.0, var = 0.0;
        for (int64_t j = 0; j < 19; ++j) mean += y.f32()[r * 19 + j];
        mean /= 19.0;
        for (int64_t j = 0; j < 19; ++j) {
            const double c = y.f32()[r * 19 + j] - mean;
            var += c * c;
        }
        var /= 19.0;
        CHECK(std::abs(mean) <= 1e-5);
        CHECK(std::abs(var - 1.0) <= 1e-4);
    }
}

TEST_CASE("layernorm backward agrees with central differences") {
    Rng rng(15);
    const int64_t r = 3, d = 11;
    Tensor x = random_tensor(rng, {r, d}, -2.0f, 2.0f);
    Tensor gamma = random_tensor(rng, {d}, 0.5f, 1.5f);
    Tensor beta = random_tensor(rng, {d}, -0.5f, 0.5f);
    Tensor w = random_tensor(rng, {r, d});  // random readout direction

    auto loss = [&]() {
        Tensor y = layernorm_forward(x, gamma, beta, 1e-6f);
        double s = 0.0;
        for (int64_t i = 0; i < y.numel(); ++i) s += double{y.f32()[i]} * w.f32()[i];
        return s;
    };

    LayerNormStats stats;
    layernorm_forward(x, gamma, beta, 1e-6f, &stats);
    Tensor dx, dgamma = Tensor::zeros({d}), dbeta = Tensor::zeros({d});
    layernorm_backward(x, gamma, stats, w, dx, dgamma, dbeta);

    for (int64_t i = 0; i < x.numel(); i += 7) {
        const double num = central_diff(loss, x.f32() + i, 1e-2f);
        CHECK(grad_close(dx.f32()[i], num));
    }
    for (int64_t j = 0; j < d; ++j) {
        CHECK(grad_close(dgamma.f32()[j], central_diff(loss, gamma.f32() + j, 1e-2f)));
        CHECK(grad_close(dbeta.f32()[j], central_diff(loss, beta.f32() + j, 1e-2f)));
    }
}

TEST_CASE("gelu matches the tanh formula and its gradient checks out") {
    Rng rng(16);
    Tensor x = random_tensor(rng, {4, 9}, -3.0f, 3.0f);
    Tensor y = gelu(x);
    for (int64_t i = 0; i < x.numel(); ++i) {
        const double v = x.f32()[i];
        const double want =
            0.5 * v * (1.0 + std::tanh(std::sqrt(2.0 / M_PI) * (v + 0.044715 * v * v * v)));
        CHECK(std::abs(y.f32()[i] - want) <= 1e-5);
    }

    Tensor w = random_tensor(rng, {4, 9});
    Tensor dx = Tensor::zeros(x.shape());
    gelu_backward(x, w, dx);
    auto loss = [&]() {
        Tensor g = gelu(x);
        double s = 0.0;
        for (int64_t i = 0; i < g.numel(); ++i) s += double{g.f32()[i]} * w.f32()[i];
        return s;
    };
    for (int64_t i = 0; i < x.numel(); i += 5) {
        CHECK(grad_close(dx.f32()[i], central_diff(loss, x.f32() + i, 1e-2f)));
    }
}

TEST_CASE("softmax_rows matches reference and survives large offsets") {
    Rng rng(17);
    Tensor x = random_tensor(rng, {6, 10}, -4.0f, 4.0f);
    // shift one row far up: stable softmax must not overflow
    for (int64_t j = 0; j < 10; ++j) x.f32()[2 * 10 + j] += 1.0e4f;
    Tensor got = softmax_rows(x);
    Tensor want = ref::softmax_rows(x);
    CHECK(max_abs_diff(got, want) <= 1e-6f);
    for (int64_t r = 0; r < 6; ++r) {
        double s = 0.0;
        for (int64_t j = 0; j < 10; ++j) {
            const float p = got.f32()[r * 10 + j];
            CHECK(p >= 0.0f);
            s += p;
        }
        CHECK(std::abs(s - 1.0) <= 1e-5);
    }
}

TEST_CASE("softmax cross-entropy value and gradient") {
    Rng rng(18);
    Tensor logits = random_tensor(rng, {5, 7}, -2.0f, 2.0f);
    std::vector<int32_t> labels = {3, 0, 6, 2, 2};
    Tensor dlogits;
    const float loss = softmax_xent(logits, labels, dlogits);

    // independent: mean of -log softmax[label]
    double want = 0.0;
    for (int64_t r = 0; r < 5; ++r) {
        double mx = -1e30;
        for (int64_t j = 0; j < 7; ++j) mx = std::max(mx, double{logits.f32()[r * 7 + j]});
        double z = 0.0;
        for (int64_t j = 0; j < 7; ++j) z += std::exp(double{logits.f32()[r * 7 + j]} - mx);
        want += -(double{logits.f32()[r * 7 + labels[static_cast<size_t>(r)]]} - mx - std::log(z));
    }
    want /= 5.0;
    CHECK(std::abs(loss - want) <= 1e-5);

    auto f = [&]() {
        Tensor d;
        return double{softmax_xent(logits, labels, d)};
    };
    for (int64_t i = 0; i < logits.numel(); i += 3) {
        CHECK(grad_close(dlogits.f32()[i], central_diff(f, logits.f32() + i, 1e-2f), 2e-2, 1e-4));
    }
}

TEST_CASE("linear layer forward oracle and gradient") {
    Rng rng(19);
    Linear lin("t.lin", 9, 5, true, rng);
    Tensor x = random_tensor(rng, {4, 9});
    Tensor y = lin.forward(x);
    Tensor want = ref::matmul(x, lin.weight().value);
    add_bias_rows(want, lin.bias().value);
    CHECK(max_abs_diff(y, want) <= 1e-5f);

    Tensor w = random_tensor(rng, {4, 5});
    auto loss = [&]() {
        Tensor out = lin.forward(x);
        double s = 0.0;
        for (int64_t i = 0; i < out.numel(); ++i) s += double{out.f32()[i]} * w.f32()[i];
        return s;
    };
    lin.forward(x);
    for (Parameter* p : lin.params()) p->grad.zero();
    Tensor dx = lin.backward(w);
    for (int64_t i = 0; i < x.numel(); i += 4) {
        CHECK(grad_close(dx.f32()[i], central_diff(loss, x.f32() + i, 1e-2f)));
    }
    for (Parameter* p : lin.params()) {
        for (int64_t i = 0; i < p->value.numel(); i += 6) {
            CHECK(grad_close(p->grad.f32()[i], central_diff(loss, p->value.f32() + i, 1e-2f)));
        }
    }
}

TEST_CASE("attention layer equals the stateless helper with zero biases") {
    Rng rng(20);
    const int64_t tokens = 6, dim = 16;
    MhaLayer mha("t.mha", dim, 4, rng);
    Tensor x = random_tensor(rng, {tokens, dim});
    Tensor got = mha.forward(x, 1, tokens);
    Tensor want = mha_forward(x, mha.wq().value, mha.wk().value, mha.wv().value,
                              mha.wo().value, 4);
    // freshly constructed layers start with zero biases, so the two paths
    // must agree exactly up to accumulation order
    CHECK(max_abs_diff(got, want) <= 1e-5f);
}

TEST_CASE("attention never crosses sample boundaries") {
    Rng rng(21);
    const int64_t tokens = 5, dim = 8;
    MhaLayer mha("t.mha", dim, 2, rng);
    Tensor two = random_tensor(rng, {2 * tokens, dim});
    Tensor y2 = mha.forward(two, 2, tokens);

    // running each sample alone must give the same rows
    Tensor one = Tensor::zeros({tokens, dim});
    for (int b = 0; b < 2; ++b) {
        std::memcpy(one.raw(), two.raw() + static_cast<size_t>(b) * tokens * dim * 4,
                    static_cast<size_t>(tokens) * dim * 4);
        Tensor y1 = mha.forward(one, 1, tokens);
        for (int64_t i = 0; i < tokens * dim; ++i) {
            CHECK(std::abs(y1.f32()[i] - y2.f32()[b * tokens * dim + i]) <= 1e-6f);
        }
    }
}

TEST_CASE("attention backward agrees with central differences") {
    Rng rng(22);
    const int64_t tokens = 4, dim = 8;
    MhaLayer mha("t.mha", dim, 2, rng);
    Tensor x = random_tensor(rng, {2 * tokens, dim});
    Tensor w = random_tensor(rng, {2 * tokens, dim});
    auto loss = [&]() {
        Tensor y = mha.forward(x, 2, tokens);
        double s = 0.0;
        for (int64_t i = 0; i < y.numel(); ++i) s += double{y.f32()[i]} * w.f32()[i];
        return s;
    };
    mha.forward(x, 2, tokens);
    for (Parameter* p : mha.params()) p->grad.zero();
    Tensor dx = mha.backward(w);
    for (int64_t i = 0; i < x.numel(); i += 5) {
        CHECK(grad_close(dx.f32()[i], central_diff(loss, x.f32() + i, 1e-2f)));
    }
    for (Parameter* p : mha.params()) {
        for (int64_t i = 0; i < p->value.numel(); i += 11) {
            CHECK(grad_close(p->grad.f32()[i], central_diff(loss, p->value.f32() + i, 1e-2f)));
        }
    }
}

TEST_CASE("element-wise helpers") {
    Tensor a = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor b = Tensor::from({2, 3}, {10, 20, 30, 40, 50, 60});
    add_inplace(a, b);
    CHECK(a.f32()[0] == 11.0f);
    CHECK(a.f32()[5] == 66.0f);
    Tensor bias = Tensor::from({3}, {1, -1, 0.5f});
    add_bias_rows(a, bias);
    CHECK(a.f32()[0] == 12.0f);
    CHECK(a.f32()[4] == 54.0f);
    scale_inplace(a, 0.5f);
    CHECK(a.f32()[0] == 6.0f);
}

TEST_CASE("kernels are bitwise identical across thread counts") {
    Rng rng(23);
    Tensor a = random_tensor(rng, {37, 23});
    Tensor b = random_tensor(rng, {23, 31});
    Tensor gamma = random_tensor(rng, {23}, 0.5f, 1.5f);
    Tensor beta = random_tensor(rng, {23});

    set_num_threads(1);
    Tensor mm1 = matmul(a, b);
    Tensor ln1 = layernorm_forward(a, gamma, beta, 1e-6f);
    Tensor sm1 = softmax_rows(a);
    Tensor ge1 = gelu(a);

    set_num_threads(3);
    Tensor mm3 = matmul(a, b);
    Tensor ln3 = layernorm_forward(a, gamma, beta, 1e-6f);
    Tensor sm3 = softmax_rows(a);
    Tensor ge3 = gelu(a);
    set_num_threads(1);

    CHECK(testutil::bitwise_equal(mm1, mm3));
    CHECK(testutil::bitwise_equal(ln1, ln3));
    CHECK(testutil::bitwise_equal(sm1, sm3));
    CHECK(testutil::bitwise_equal(ge1, ge3));
}
