// Microbenchmarks for the hot paths: convolution, block forward passes per
// variant, the denoiser stack, and a full optimizer step. Build with
// -DCMAKE_BUILD_TYPE=Release; google-benchmark prints a warning otherwise.

#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "rcmk/autograd.hpp"
#include "rcmk/data.hpp"
#include "rcmk/model.hpp"
#include "rcmk/nn.hpp"
#include "rcmk/rconv.hpp"
#include "rcmk/robustness.hpp"

using namespace rcmk;

namespace {

Tensor random_input(Shape shape, std::uint64_t seed) {
    Tensor x = Tensor::zeros(shape);
    Rng rng(seed);
    for (auto& v : x.raw_data<float>()) v = static_cast<float>(rng.normal());
    return x;
}

void bm_conv2d(benchmark::State& state) {
    const std::int64_t c = state.range(0);
    const std::int64_t k = state.range(1);
    NoGradGuard guard;
    Tensor x = random_input({8, c, 28, 28}, 1);
    Conv2dParams p;
    Rng rng(2);
    p.weight = he_normal({c, c, k, k}, DType::Float32, rng);
    p.padding = same_padding(k);
    for (auto _ : state) {
        Tensor y = conv2d(x, p);
        benchmark::DoNotOptimize(y);
    }
    state.SetItemsProcessed(state.iterations() * 8);
}

void bm_depthwise_conv2d(benchmark::State& state) {
    const std::int64_t c = state.range(0);
    NoGradGuard guard;
    Tensor x = random_input({8, c, 28, 28}, 3);
    Conv2dParams p;
    Rng rng(4);
    p.weight = he_normal({c, 1, 3, 3}, DType::Float32, rng);
    p.padding = 1;
    p.groups = c;
    for (auto _ : state) {
        Tensor y = conv2d(x, p);
        benchmark::DoNotOptimize(y);
    }
}

void bm_block_forward(benchmark::State& state) {
    const auto variant = static_cast<Variant>(state.range(0));
    RConvConfig cfg;
    cfg.c_in = 32;
    cfg.c_out = 32;
    cfg.variant = variant;
    RConvBlock block = build_block(cfg, 7);
    NoGradGuard guard;
    Tensor x = random_input({8, 32, 14, 14}, 5);
    for (auto _ : state) {
        Tensor y = block_forward(block, x, Mode::Eval);
        benchmark::DoNotOptimize(y);
    }
}

void bm_denoiser(benchmark::State& state) {
    NSTState s = NSTState::create(32);
    NoGradGuard guard;
    Tensor x = random_input({8, 32, 14, 14}, 6);
    for (auto _ : state) {
        Tensor y = nst_forward(x, s, Mode::Eval);
        benchmark::DoNotOptimize(y);
    }
}

void bm_train_step(benchmark::State& state) {
    Model m = build_model(tiny_spec(Variant::MK), 11);
    Dataset ds = synth_digits(64, 8);
    std::vector<std::int64_t> idx(64);
    for (std::int64_t i = 0; i < 64; ++i) idx[static_cast<std::size_t>(i)] = i;
    Tensor x = gather_batch(ds, idx);
    auto y = gather_labels(ds, idx);
    Sgd opt(m.parameters(), {0.05, 0.9, 2e-4});
    for (auto _ : state) {
        Tape::active().reset();
        Tensor loss = cross_entropy(forward(m, x, Mode::Train), y);
        opt.zero_grad();
        backward(loss);
        opt.step();
        benchmark::DoNotOptimize(loss);
    }
    state.SetItemsProcessed(state.iterations() * 64);
}

void bm_fgsm(benchmark::State& state) {
    Model m = build_model(tiny_spec(Variant::MK), 12);
    Dataset ds = synth_digits(32, 9);
    std::vector<std::int64_t> idx(32);
    for (std::int64_t i = 0; i < 32; ++i) idx[static_cast<std::size_t>(i)] = i;
    Tensor x = gather_batch(ds, idx);
    auto labels = gather_labels(ds, idx);
    AttackSpec spec;
    spec.kind = AttackKind::FGSM;
    for (auto _ : state) {
        Tensor adv = run_attack(m, x, labels, spec);
        benchmark::DoNotOptimize(adv);
    }
}

}  // namespace

BENCHMARK(bm_conv2d)->Args({16, 3})->Args({32, 3})->Args({32, 5});
BENCHMARK(bm_depthwise_conv2d)->Arg(16)->Arg(64);
BENCHMARK(bm_block_forward)
    ->Arg(static_cast<int>(Variant::MK))
    ->Arg(static_cast<int>(Variant::UK))
    ->Arg(static_cast<int>(Variant::DMK))
    ->Arg(static_cast<int>(Variant::Conv2d));
BENCHMARK(bm_denoiser);
BENCHMARK(bm_train_step);
BENCHMARK(bm_fgsm);

BENCHMARK_MAIN();
