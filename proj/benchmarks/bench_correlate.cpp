#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "eprcam/correlate.hpp"

using namespace eprcam;
using namespace eprcam::correlate;

namespace {

std::vector<BinaryFrame> stack(int side, double occupancy, int frames) {
    std::mt19937_64 gen(1);
    std::bernoulli_distribution bit(occupancy);
    std::vector<BinaryFrame> out;
    for (int f = 0; f < frames; ++f) {
        BinaryFrame frame(side, side);
        for (auto& b : frame.bits) b = bit(gen);
        out.push_back(std::move(frame));
    }
    return out;
}

void engine_add(benchmark::State& state, CorrelationPath path) {
    const int side = static_cast<int>(state.range(0));
    const double occupancy = state.range(1) / 1000.0;
    const auto frames = stack(side, occupancy, 16);
    EngineOptions opts;
    opts.path = path;
    CorrelationEngine engine(CorrelationMode::Difference, side, side, opts);
    engine.add(frames.back());  // plan outside the timed loop
    std::size_t i = 0;
    for (auto _ : state) {
        engine.add(frames[i++ % frames.size()]);
    }
    benchmark::DoNotOptimize(engine.stats());
    state.SetItemsProcessed(state.iterations());
}

void BM_EngineSpectral(benchmark::State& state) { engine_add(state, CorrelationPath::Spectral); }
void BM_EngineSparse(benchmark::State& state) { engine_add(state, CorrelationPath::Sparse); }

// Occupancy in thousandths.
BENCHMARK(BM_EngineSpectral)->Args({201, 40})->Args({128, 40})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EngineSparse)->Args({201, 2})->Args({201, 10})->Args({201, 40})->Unit(benchmark::kMillisecond);

void BM_EngineReadout(benchmark::State& state) {
    const auto frames = stack(201, 0.04, 4);
    EngineOptions opts;
    opts.path = CorrelationPath::Spectral;
    CorrelationEngine engine(CorrelationMode::Sum, 201, 201, opts);
    for (const auto& f : frames) engine.add(f);
    for (auto _ : state) {
        benchmark::DoNotOptimize(engine.signal());
    }
}
BENCHMARK(BM_EngineReadout)->Unit(benchmark::kMillisecond);

void BM_JointAccumulator(benchmark::State& state) {
    const auto frames = stack(201, 0.04, 16);
    JointAccumulator acc(Axis::X, 201, 201);
    std::size_t i = 0;
    for (auto _ : state) {
        acc.add(frames[i++ % frames.size()]);
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_JointAccumulator)->Unit(benchmark::kMicrosecond);

void BM_Subtract(benchmark::State& state) {
    const auto frames = stack(201, 0.04, 8);
    const auto sig = fft_accumulate(frames, CorrelationMode::Difference);
    const auto ref = fft_reference(frames, CorrelationMode::Difference);
    for (auto _ : state) {
        benchmark::DoNotOptimize(subtract(sig, ref, MaskSet{}));
    }
}
BENCHMARK(BM_Subtract)->Unit(benchmark::kMillisecond);

}  // namespace
