#include <benchmark/benchmark.h>

#include <random>

#include "xbemu/funcsim.hpp"

using namespace xbemu;

static void BM_LinearLayer(benchmark::State& state) {
    const auto kind = static_cast<BackendKind>(state.range(0));
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<std::int64_t> w(-4000, 4000), x(0, 8000);
    LinearLayer layer;
    layer.in_features = 256;
    layer.out_features = 64;
    layer.weight.resize(256 * 64);
    for (auto& c : layer.weight) c = w(rng);
    layer.bias.assign(64, 0);
    CodeMatrix in(256, 16);
    for (auto& c : in.reshaped()) c = x(rng);
    CrossbarConfig cfg;
    MvmArch arch;
    const auto backend = make_backend(kind, cfg);
    for (auto _ : state)
        benchmark::DoNotOptimize(linear_mvm(in, layer, {}, arch, *backend, nullptr, {1, 4096}).data());
    state.SetLabel(to_string(kind));
}
BENCHMARK(BM_LinearLayer)
    ->Arg(static_cast<int>(BackendKind::ideal))
    ->Arg(static_cast<int>(BackendKind::analytical_linear))
    ->Unit(benchmark::kMillisecond);

static void BM_StreamInputs(benchmark::State& state) {
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<std::int64_t> x(-32768, 32767);
    CodeMatrix in(576, 256);
    for (auto& c : in.reshaped()) c = x(rng);
    MvmArch arch;
    for (auto _ : state) benchmark::DoNotOptimize(stream_inputs(in, arch).values.data());
}
BENCHMARK(BM_StreamInputs);

BENCHMARK_MAIN();
