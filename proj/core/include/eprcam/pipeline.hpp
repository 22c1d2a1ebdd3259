#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "eprcam/config.hpp"
#include "eprcam/correlate.hpp"
#include "eprcam/emccd.hpp"
#include "eprcam/inference.hpp"

namespace eprcam::pipeline {

using config::RunConfig;

/// Raw frame i of the dark stack (no photons). Depends only on (seed, i).
emccd::RawFrame dark_frame(const RunConfig& cfg, std::size_t index);
/// Raw frame i of a signal stack for `plane`.
emccd::RawFrame signal_frame(const RunConfig& cfg, model::Plane plane, std::size_t index);

/// Re-iterable source regenerating `frames` dark frames from their seeds.
emccd::RawFrameSource dark_source(const RunConfig& cfg, std::size_t frames);

struct DarkCalibration {
    emccd::Calibration calibration;
    double threshold_k = 0.0;
    /// True when threshold_k came from the flux-equivalence calibration.
    bool calibrated = false;
    double dark_occupancy = 0.0;
};

/// Calibrates on cfg.frames.dark dark frames and resolves threshold_k.
DarkCalibration calibrate_dark(const RunConfig& cfg);
DarkCalibration calibrate_dark(const RunConfig& cfg, const emccd::RawFrameSource& dark);

/// Pull-style frame source: fills `frame` and returns true, or returns false
/// at the end of the stack.
using BinarySource = std::function<bool(emccd::BinaryFrame& frame)>;

/// Thresholded simulated frames [0, frames) of `plane`.
BinarySource simulated_source(const RunConfig& cfg, model::Plane plane, std::size_t frames,
                              const DarkCalibration& dark);

struct PeakWidths {
    std::optional<inference::GaussianFit> u;
    std::optional<inference::GaussianFit> v;
    /// Fitted widths converted to detector um.
    double sigma_u_um = 0.0;
    double sigma_v_um = 0.0;
};

struct PlaneAnalysis {
    model::Plane plane = model::Plane::ImagePlane;
    std::size_t frames = 0;
    double mean_occupancy = 0.0;
    /// Crystal-plane units per detector pixel.
    double scale = 0.0;

    correlate::CorrelationMap signal;
    correlate::CorrelationMap reference;
    correlate::SubtractedMap subtracted;
    correlate::EngineStats engine;
    correlate::PeakStats peak;
    PeakWidths peak_widths;

    correlate::JointDistribution joint_x;
    correlate::JointDistribution joint_y;
    std::optional<inference::AxisWidths> widths_x;
    std::optional<inference::AxisWidths> widths_y;

    /// Delta^2(1|2) and Delta^2(2|1) along x, with bootstrap errors.
    std::optional<inference::VarianceEstimate> first_given_second;
    std::optional<inference::VarianceEstimate> second_given_first;
    std::vector<std::string> notes;
};

/// Streams every frame, builds the correlation maps and joint
/// distributions, fits the peak and the conditional variances. `frames`
/// sizes the bootstrap blocks and must match what the source yields.
PlaneAnalysis analyze_plane(const BinarySource& source, std::size_t frames, model::Plane plane,
                            const RunConfig& cfg);

/// Assembles the EPR report from whichever planes are present.
inference::EprReport make_report(const PlaneAnalysis* image, const PlaneAnalysis* far,
                                 const RunConfig& cfg);

struct RunResult {
    RunConfig config;
    config::Digest digest{};
    DarkCalibration dark;
    std::optional<PlaneAnalysis> image;
    std::optional<PlaneAnalysis> far;
    inference::EprReport report;
};

/// In-memory end to end: calibrate, simulate and analyse the requested planes.
RunResult run_simulated(const RunConfig& cfg, bool image_plane = true, bool far_field = true);

// ---------------------------------------------------------------------------

struct SimulatedFiles {
    std::filesystem::path config;
    std::filesystem::path calibration;
    std::filesystem::path dark;
    std::optional<std::filesystem::path> image;
    std::optional<std::filesystem::path> far;
};

/// Writes config.json, calibration.json, dark.bpcm (raw) and the binary
/// signal stacks for the requested planes into cfg.output_dir.
SimulatedFiles simulate_to_files(const RunConfig& cfg, bool image_plane, bool far_field);

/// Analyses binary stacks from disk. Headers are validated (kind, plane,
/// dimensions, matching digests) before any frame is read.
RunResult analyze_files(const RunConfig& cfg, const std::optional<std::filesystem::path>& image,
                        const std::optional<std::filesystem::path>& far);

}  // namespace eprcam::pipeline
