// OpenMP kernels against the serial reference, across widths.

#include <benchmark/benchmark.h>

#include "varac/neural.hpp"
#include "varac/rng.hpp"

using namespace varac;

namespace {

constexpr std::size_t kInput = 10;

Eigen::VectorXd input(std::uint64_t seed) {
    Rng rng(seed);
    Eigen::VectorXd x(kInput);
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.normal();
    return x / x.norm();
}

DeepNet net_for(const benchmark::State& state) {
    return init_net(kInput, static_cast<std::size_t>(state.range(0)), 2, 10.0, 1);
}

// pushes every layer outside its ball so projection does real work
DeepNet displaced(const benchmark::State& state) {
    DeepNet net = net_for(state);
    for (auto& w : net.layers()) w.array() += 1.0;
    return net;
}

void BM_forward(benchmark::State& state) {
    const DeepNet net = net_for(state);
    const auto x = input(2);
    NetWorkspace ws;
    for (auto _ : state) benchmark::DoNotOptimize(forward(net, x, ws));
}

void BM_forward_reference(benchmark::State& state) {
    const DeepNet net = net_for(state);
    const auto x = input(2);
    for (auto _ : state) benchmark::DoNotOptimize(reference::forward(net, x));
}

void BM_gradient(benchmark::State& state) {
    const DeepNet net = net_for(state);
    const auto x = input(3);
    for (auto _ : state) benchmark::DoNotOptimize(gradient(net, x));
}

void BM_gradient_reference(benchmark::State& state) {
    const DeepNet net = net_for(state);
    const auto x = input(3);
    for (auto _ : state) benchmark::DoNotOptimize(reference::gradient(net, x));
}

void BM_fused_step(benchmark::State& state) {
    DeepNet net = net_for(state);
    const auto x = input(4);
    NetWorkspace ws;
    for (auto _ : state) {
        apply_gradient_step(net, x, 1e-6, ws);
        benchmark::ClobberMemory();
    }
}

void BM_project(benchmark::State& state) {
    const DeepNet start = displaced(state);
    for (auto _ : state) {
        state.PauseTiming();
        DeepNet net = start;
        state.ResumeTiming();
        project_in_place(net);
        benchmark::DoNotOptimize(net.layers().front().data());
    }
}

void BM_project_reference(benchmark::State& state) {
    const DeepNet start = displaced(state);
    for (auto _ : state) {
        state.PauseTiming();
        DeepNet net = start;
        state.ResumeTiming();
        reference::project_in_place(net);
        benchmark::DoNotOptimize(net.layers().front().data());
    }
}

} // namespace

#define WIDTHS RangeMultiplier(4)->Range(16, 1024)

BENCHMARK(BM_forward)->WIDTHS;
BENCHMARK(BM_forward_reference)->WIDTHS;
BENCHMARK(BM_gradient)->WIDTHS;
BENCHMARK(BM_gradient_reference)->WIDTHS;
BENCHMARK(BM_fused_step)->WIDTHS;
BENCHMARK(BM_project)->WIDTHS;
BENCHMARK(BM_project_reference)->WIDTHS;

BENCHMARK_MAIN();
