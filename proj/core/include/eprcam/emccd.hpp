#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "eprcam/rng.hpp"
#include "eprcam/sampler.hpp"

namespace eprcam::emccd {

enum class GainModel {
    /// Single-electron limit of the multiplication register.
    Exponential,
    /// Every electron leaves the register with exactly em_gain electrons.
    Deterministic,
};

/// EMCCD geometry and noise model. Probabilities are per pixel per frame
/// unless stated otherwise.
struct CameraParams {
    double pixel_pitch_um = 16.0;
    int width = 201;
    int height = 201;
    double qe = 0.8;
    double readout_mean = 390.0;
    double readout_sigma = 6.0;
    double tail_prob = 0.005;
    double tail_scale = 30.0;
    double em_gain = 300.0;
    GainModel gain_model = GainModel::Exponential;
    double cic_prob = 0.0005;
    /// Probability that a photoelectron also deposits charge one row towards
    /// the readout register (row index - 1).
    double smear_prob = 0.0;
    double full_well = 800000.0;
    double threshold_k = 1.0;

    void validate() const;
    std::size_t pixels() const noexcept {
        return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    }
};

/// Electron counts after gain and readout, row-major, quantised to the
/// 1/256 e- grid used by the stack file format.
struct RawFrame {
    int width = 0;
    int height = 0;
    std::vector<double> electrons;

    RawFrame() = default;
    RawFrame(int w, int h, double fill = 0.0)
        : width(w), height(h), electrons(static_cast<std::size_t>(w) * h, fill) {}

    double& at(int x, int y) { return electrons[static_cast<std::size_t>(y) * width + x]; }
    double at(int x, int y) const { return electrons[static_cast<std::size_t>(y) * width + x]; }
};

struct Pixel {
    int x = 0;
    int y = 0;
    friend bool operator==(const Pixel&, const Pixel&) = default;
};

struct BinaryFrame {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits;

    BinaryFrame() = default;
    BinaryFrame(int w, int h) : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0) {}

    std::uint8_t at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x]; }
    void set(int x, int y, bool on = true) {
        bits[static_cast<std::size_t>(y) * width + x] = on ? 1 : 0;
    }

    std::size_t count() const noexcept;
    double occupancy() const noexcept;
    /// Coordinates of every set pixel, row-major order.
    std::vector<Pixel> ones() const;

    friend bool operator==(const BinaryFrame&, const BinaryFrame&) = default;
};

struct ExposureStats {
    std::size_t impacts = 0;
    std::size_t out_of_roi = 0;
    std::size_t detected = 0;
    std::size_t smeared = 0;
    std::size_t cic_events = 0;
    std::size_t tail_events = 0;
    std::size_t saturated = 0;
};

/// Pixel index for a detector coordinate (um from the ROI centre); -1 when
/// outside the ROI.
int pixel_column(double x_um, const CameraParams& cam) noexcept;
int pixel_row(double y_um, const CameraParams& cam) noexcept;

RawFrame expose(std::span<const sampler::Vec2> impacts, const CameraParams& cam,
                rng::Engine& rng, ExposureStats* stats = nullptr);

/// Streams every frame of a re-iterable stack into `visit`. Calibration makes
/// two passes, so the source must yield the same frames each time.
using RawFrameSource = std::function<void(const std::function<void(const RawFrame&)>& visit)>;

RawFrameSource source_of(std::span<const RawFrame> frames);

class ResidualHistogram {
public:
    static constexpr double bin_width = 1.0 / 256.0;
    static constexpr double half_range = 512.0;

    ResidualHistogram();

    void add(double residual);
    void merge(const ResidualHistogram& other);

    std::uint64_t total() const noexcept { return total_; }
    /// Value below which `fraction` of the residuals lie (bin-centre resolution).
    double quantile(double fraction) const;
    /// Fraction of residuals strictly above the upper edge of the bin holding t.
    double fraction_above(double t) const;
    /// Smallest bin edge t with fraction_above(t) <= target, or NaN if none.
    double smallest_threshold_for(double target) const;

private:
    std::vector<std::uint64_t> counts_;
    std::uint64_t total_ = 0;
};

struct Calibration {
    int width = 0;
    int height = 0;
    std::vector<double> pixel_mean;
    /// Width of the central Gaussian of the dark residuals.
    double sigma_noise = 0.0;
    /// Location of the central Gaussian of the raw dark values.
    double readout_center = 0.0;
    std::size_t frames = 0;
    ResidualHistogram residuals;
};

/// Per-pixel means plus a robust noise width. The residual distribution has an
/// exponential tail on the high side only, so sigma is taken from the lower
/// half: (median - lower quartile) / 0.6745.
Calibration calibrate(const RawFrameSource& dark_stack);
Calibration calibrate(std::span<const RawFrame> dark_stack);

/// Bit set iff (value - pixel mean) > k * sigma_noise.
BinaryFrame threshold(const RawFrame& frame, const Calibration& cal, double k);

/// Smallest k for which the dark occupancy is at most `target_occupancy`,
/// resolved to the residual histogram bin width.
double calibrate_flux_equivalence(const Calibration& cal, double target_occupancy);
double calibrate_flux_equivalence(std::span<const RawFrame> dark_stack,
                                  double target_occupancy);

/// Occupancy of a dark stack at multiplier k, computed from the calibration's
/// own residuals.
double dark_occupancy(const Calibration& cal, double k);

}  // namespace eprcam::emccd
