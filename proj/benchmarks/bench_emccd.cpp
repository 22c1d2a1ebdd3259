#include <vector>

#include <benchmark/benchmark.h>

#include "eprcam/emccd.hpp"
#include "eprcam/model.hpp"
#include "eprcam/rng.hpp"
#include "eprcam/sampler.hpp"

using namespace eprcam;

namespace {

const model::Biphoton kSource = model::Biphoton::from(model::SourceParams{});

void BM_SamplePair(benchmark::State& state) {
    const auto optics = model::OpticalSystem::far_field(100.0);
    auto rng = rng::make_engine(1, rng::Stream::Test, 0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(sampler::sample_pair(optics, kSource, rng));
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_SamplePair);

void BM_FrameEvents(benchmark::State& state) {
    const emccd::CameraParams cam;
    const auto flux = sampler::FluxConfig::for_detected_flux(0.02 * cam.pixels(), cam.qe, 1.0,
                                                             sampler::Attenuation::BeforeCrystal);
    const auto optics = model::OpticalSystem::image_plane(2.5);
    auto rng = rng::make_engine(2, rng::Stream::Test, 0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(sampler::generate_frame_events(flux, optics, kSource, rng));
    }
}
BENCHMARK(BM_FrameEvents)->Unit(benchmark::kMicrosecond);

void BM_Expose(benchmark::State& state) {
    const emccd::CameraParams cam;
    const auto flux = sampler::FluxConfig::for_detected_flux(0.02 * cam.pixels(), cam.qe, 1.0,
                                                             sampler::Attenuation::BeforeCrystal);
    const auto optics = model::OpticalSystem::image_plane(2.5);
    auto rng = rng::make_engine(3, rng::Stream::Test, 0);
    const auto impacts = sampler::generate_frame_events(flux, optics, kSource, rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(emccd::expose(impacts, cam, rng));
    }
    state.counters["impacts"] = static_cast<double>(impacts.size());
}
BENCHMARK(BM_Expose)->Unit(benchmark::kMicrosecond);

void BM_Threshold(benchmark::State& state) {
    const emccd::CameraParams cam;
    std::vector<emccd::RawFrame> dark;
    for (int i = 0; i < 20; ++i) {
        auto rng = rng::make_engine(4, rng::Stream::Dark, i);
        dark.push_back(emccd::expose({}, cam, rng));
    }
    const auto cal = emccd::calibrate(dark);
    for (auto _ : state) {
        benchmark::DoNotOptimize(emccd::threshold(dark[0], cal, 2.0));
    }
}
BENCHMARK(BM_Threshold)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
