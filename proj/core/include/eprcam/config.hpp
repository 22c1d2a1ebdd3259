#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "eprcam/correlate.hpp"
#include "eprcam/emccd.hpp"
#include "eprcam/model.hpp"
#include "eprcam/sampler.hpp"

namespace eprcam::config {

using Digest = std::array<std::uint8_t, 32>;

struct OpticsConfig {
    double magnification = 2.5;
    double effective_focal_mm = 100.0;

    model::OpticalSystem image_plane() const { return model::OpticalSystem::image_plane(magnification); }
    model::OpticalSystem far_field() const { return model::OpticalSystem::far_field(effective_focal_mm); }
};

struct FluxSettings {
    /// Detected photons per pixel per frame; also the dark-occupancy target
    /// when threshold_k is calibrated.
    double photons_per_pixel = 0.02;
    /// Attenuator transmission.
    double transmission = 1.0;
    sampler::Attenuation attenuation = sampler::Attenuation::BeforeCrystal;

    sampler::FluxConfig flux_for(const emccd::CameraParams& cam) const;
};

struct FrameCounts {
    std::size_t dark = 1000;
    std::size_t image_plane = 20000;
    std::size_t far_field = 20000;
};

struct AnalysisSettings {
    double weight_floor = 0.01;
    std::size_t bootstrap_blocks = 20;
    std::size_t bootstrap_resamples = 50;
    std::size_t sparse_max_ones = 400;
    int peak_radius = 2;
};

struct RunConfig {
    model::SourceParams source;
    OpticsConfig optics;
    emccd::CameraParams camera;
    /// Fixed threshold multiplier; empty = calibrate against the flux target.
    std::optional<double> threshold_k;
    FluxSettings flux;
    FrameCounts frames;
    std::uint64_t seed = 1;
    correlate::MaskSet masks;
    AnalysisSettings analysis;
    std::filesystem::path output_dir = "eprcam-out";

    void validate() const;
};

/// Strict parse: every field must be present, unknown keys are rejected and
/// lengths carry units ("355 nm"). Errors are ErrorKind::Schema and name the
/// offending field path.
RunConfig from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& cfg);

RunConfig load(const std::filesystem::path& path);
void save(const RunConfig& cfg, const std::filesystem::path& path);

/// SHA-256 of the canonical JSON form, excluding the output directory.
Digest digest(const RunConfig& cfg);
std::string to_hex(const Digest& d);

}  // namespace eprcam::config
