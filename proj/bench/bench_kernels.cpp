// Compares the OpenMP kernels against their serial reference counterparts on
// transformer-shaped workloads. Run with --benchmark_filter=... to narrow.

#include <benchmark/benchmark.h>

#include "llvit/ops.hpp"
#include "llvit/ref_ops.hpp"
#include "llvit/rng.hpp"
#include "llvit/tensor.hpp"
#include "llvit/threading.hpp"

using namespace llvit;

namespace {

Tensor random_tensor(uint64_t seed, std::vector<int64_t> shape) {
    Rng rng(seed);
    Tensor t = Tensor::zeros(std::move(shape));
    for (int64_t i = 0; i < t.numel(); ++i) t.f32()[i] = rng.uniform(-1.0f, 1.0f);
    return t;
}

// token count x model width of the tiny encoder: the shape every per-block
// GEMM in the float path actually runs at
constexpr int64_t kTokens = 197;
constexpr int64_t kDim = 192;

void bm_matmul_ref(benchmark::State& state) {
    const int64_t k = state.range(0);
    Tensor a = random_tensor(1, {kTokens, k});
    Tensor b = random_tensor(2, {k, kDim});
    for (auto _ : state) {
        Tensor c = ref::matmul(a, b);
        benchmark::DoNotOptimize(c.f32());
    }
    state.SetItemsProcessed(state.iterations() * kTokens * k * kDim);
}

void bm_matmul_omp(benchmark::State& state) {
    const int64_t k = state.range(0);
    Tensor a = random_tensor(1, {kTokens, k});
    Tensor b = random_tensor(2, {k, kDim});
    for (auto _ : state) {
        Tensor c = matmul(a, b);
        benchmark::DoNotOptimize(c.f32());
    }
    state.SetItemsProcessed(state.iterations() * kTokens * k * kDim);
}

void bm_layernorm_ref(benchmark::State& state) {
    Tensor x = random_tensor(3, {state.range(0), kDim});
    Tensor gamma = random_tensor(4, {kDim});
    Tensor beta = random_tensor(5, {kDim});
    for (auto _ : state) {
        Tensor y = ref::layernorm_forward(x, gamma, beta, 1e-6f);
        benchmark::DoNotOptimize(y.f32());
    }
    state.SetItemsProcessed(state.iterations() * x.numel());
}

void bm_layernorm_omp(benchmark::State& state) {
    Tensor x = random_tensor(3, {state.range(0), kDim});
    Tensor gamma = random_tensor(4, {kDim});
    Tensor beta = random_tensor(5, {kDim});
    for (auto _ : state) {
        Tensor y = layernorm_forward(x, gamma, beta, 1e-6f);
        benchmark::DoNotOptimize(y.f32());
    }
    state.SetItemsProcessed(state.iterations() * x.numel());
}

void bm_softmax_ref(benchmark::State& state) {
    Tensor x = random_tensor(6, {state.range(0), kTokens});
    for (auto _ : state) {
        Tensor y = ref::softmax_rows(x);
        benchmark::DoNotOptimize(y.f32());
    }
    state.SetItemsProcessed(state.iterations() * x.numel());
}

void bm_softmax_omp(benchmark::State& state) {
    Tensor x = random_tensor(6, {state.range(0), kTokens});
    for (auto _ : state) {
        Tensor y = softmax_rows(x);
        benchmark::DoNotOptimize(y.f32());
    }
    state.SetItemsProcessed(state.iterations() * x.numel());
}

void bm_gelu_ref(benchmark::State& state) {
    Tensor x = random_tensor(7, {state.range(0), 4 * kDim});
    for (auto _ : state) {
        Tensor y = ref::gelu(x);
        benchmark::DoNotOptimize(y.f32());
    }
    state.SetItemsProcessed(state.iterations() * x.numel());
}

void bm_gelu_omp(benchmark::State& state) {
    Tensor x = random_tensor(7, {state.range(0), 4 * kDim});
    for (auto _ : state) {
        Tensor y = gelu(x);
        benchmark::DoNotOptimize(y.f32());
    }
    state.SetItemsProcessed(state.iterations() * x.numel());
}

BENCHMARK(bm_matmul_ref)->Arg(kDim)->Arg(4 * kDim);
BENCHMARK(bm_matmul_omp)->Arg(kDim)->Arg(4 * kDim);
BENCHMARK(bm_layernorm_ref)->Arg(kTokens)->Arg(64 * kTokens);
BENCHMARK(bm_layernorm_omp)->Arg(kTokens)->Arg(64 * kTokens);
BENCHMARK(bm_softmax_ref)->Arg(3 * kTokens)->Arg(64 * kTokens);
BENCHMARK(bm_softmax_omp)->Arg(3 * kTokens)->Arg(64 * kTokens);
BENCHMARK(bm_gelu_ref)->Arg(kTokens)->Arg(64 * kTokens);
BENCHMARK(bm_gelu_omp)->Arg(kTokens)->Arg(64 * kTokens);

}  // namespace

BENCHMARK_MAIN();
