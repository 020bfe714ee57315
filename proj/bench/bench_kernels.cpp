// Serial reference kernels against the OpenMP/GEMM kernels on layer shapes
// taken from a 64x64 PriCNN forward pass at batch 8.

#include <benchmark/benchmark.h>

#include <random>

#include "dsdr/init.hpp"
#include "dsdr/ops.hpp"
#include "dsdr/reference_ops.hpp"

namespace {

using namespace dsdr;

Tensor random_tensor(Shape s, std::uint64_t seed) {
    Rng rng(seed);
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    Tensor t(s);
    for (float& v : t.values()) v = u(rng);
    return t;
}

ConvFilter random_filter(int out, int in, int k, std::uint64_t seed) {
    ConvFilter f = ConvFilter::zeros(out, in, k);
    f.weights = random_tensor({out, in, k, k}, seed);
    return f;
}

// Args: input channels, output channels, spatial size.
void conv_args(benchmark::internal::Benchmark* b) {
    b->Args({1, 32, 64})->Args({32, 64, 32})->Args({128, 512, 8})->Args({192, 64, 32})->Unit(benchmark::kMillisecond);
}

template <bool Reference>
void BM_Conv2d(benchmark::State& state) {
    const int c = static_cast<int>(state.range(0)), o = static_cast<int>(state.range(1)), s = static_cast<int>(state.range(2));
    const Tensor x = random_tensor({8, c, s, s}, 1);
    const ConvFilter f = random_filter(o, c, 3, 2);
    for (auto _ : state) benchmark::DoNotOptimize(Reference ? reference::conv2d(x, f) : ops::conv2d(x, f));
    state.counters["GFLOP/s"] = benchmark::Counter(2.0 * 8 * o * c * 9 * s * s * state.iterations() / 1e9,
                                                   benchmark::Counter::kIsRate);
}

template <bool Reference>
void BM_Conv2dBackward(benchmark::State& state) {
    const int c = static_cast<int>(state.range(0)), o = static_cast<int>(state.range(1)), s = static_cast<int>(state.range(2));
    const Tensor x = random_tensor({8, c, s, s}, 1);
    const ConvFilter f = random_filter(o, c, 3, 2);
    const Tensor g = random_tensor({8, o, s, s}, 3);
    for (auto _ : state)
        benchmark::DoNotOptimize(Reference ? reference::conv2d_backward(x, f, g) : ops::conv2d_backward(x, f, g));
}

template <bool Reference>
void BM_MaxPool(benchmark::State& state) {
    const Tensor x = random_tensor({8, 64, 32, 32}, 4);
    for (auto _ : state) benchmark::DoNotOptimize(Reference ? reference::maxpool2x2(x) : ops::maxpool2x2(x));
}

template <bool Reference>
void BM_Upsample(benchmark::State& state) {
    const Tensor x = random_tensor({8, 128, 16, 16}, 5);
    for (auto _ : state)
        benchmark::DoNotOptimize(Reference ? reference::upsample2x_bilinear(x) : ops::upsample2x_bilinear(x));
}

}  // namespace

BENCHMARK(BM_Conv2d<true>)->Name("conv2d/reference")->Apply(conv_args);
BENCHMARK(BM_Conv2d<false>)->Name("conv2d/openmp")->Apply(conv_args);
BENCHMARK(BM_Conv2dBackward<true>)->Name("conv2d_backward/reference")->Apply(conv_args);
BENCHMARK(BM_Conv2dBackward<false>)->Name("conv2d_backward/openmp")->Apply(conv_args);
BENCHMARK(BM_MaxPool<true>)->Name("maxpool2x2/reference")->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_MaxPool<false>)->Name("maxpool2x2/openmp")->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Upsample<true>)->Name("upsample2x/reference")->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Upsample<false>)->Name("upsample2x/openmp")->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
