#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "eprcam/emccd.hpp"
#include "eprcam/model.hpp"

namespace eprcam::correlate {

using emccd::BinaryFrame;
using emccd::Pixel;

enum class CorrelationMode {
    /// Coincidences indexed by rho'_1 - rho'_2 (image plane).
    Difference,
    /// Coincidences indexed by rho'_1 + rho'_2 (far field).
    Sum,
};

std::string_view to_string(CorrelationMode mode) noexcept;

/// Integer coincidence counts over relative pixel coordinates of a W x H
/// frame. The grid is (2W-1) x (2H-1): Difference maps cover offsets
/// [-(W-1), W-1], Sum maps cover pixel-index sums [0, 2W-2].
class CorrelationMap {
public:
    CorrelationMap() = default;
    CorrelationMap(CorrelationMode mode, int frame_width, int frame_height);

    CorrelationMode mode() const noexcept { return mode_; }
    int frame_width() const noexcept { return frame_width_; }
    int frame_height() const noexcept { return frame_height_; }
    int grid_width() const noexcept { return 2 * frame_width_ - 1; }
    int grid_height() const noexcept { return 2 * frame_height_ - 1; }

    /// Grid offset of coordinate 0 along each axis (W-1 for Difference, 0 for Sum).
    int origin_x() const noexcept { return mode_ == CorrelationMode::Difference ? frame_width_ - 1 : 0; }
    int origin_y() const noexcept { return mode_ == CorrelationMode::Difference ? frame_height_ - 1 : 0; }
    /// Coordinate of the correlation peak for a perfectly (anti-)correlated
    /// source: offset 0 or the doubled frame centre.
    int peak_u() const noexcept { return mode_ == CorrelationMode::Difference ? 0 : frame_width_ - 1; }
    int peak_v() const noexcept { return mode_ == CorrelationMode::Difference ? 0 : frame_height_ - 1; }

    bool contains(int u, int v) const noexcept;
    std::int64_t count(int u, int v) const;
    std::int64_t& count_ref(int u, int v);

    std::int64_t total() const noexcept;
    std::span<const std::int64_t> counts() const noexcept { return counts_; }
    std::span<std::int64_t> counts() noexcept { return counts_; }

    /// Frames (signal) or frame pairs (reference) contributing to the counts.
    std::size_t frames_accumulated = 0;
    /// Per-pixel number of set bits summed over frames; locates the ordered
    /// self-pairs inside a signal map. Empty for reference maps.
    std::vector<std::int64_t> singles;

    CorrelationMap& operator+=(const CorrelationMap& other);
    friend bool operator==(const CorrelationMap&, const CorrelationMap&) = default;

private:
    CorrelationMode mode_ = CorrelationMode::Difference;
    int frame_width_ = 0;
    int frame_height_ = 0;
    std::vector<std::int64_t> counts_;
};

enum class CorrelationPath { Auto, Sparse, Spectral };

struct EngineOptions {
    CorrelationPath path = CorrelationPath::Auto;
    /// Auto path: frames with more set bits than this go through the FFT.
    std::size_t sparse_max_ones = 400;
    bool with_reference = true;
    /// Benchmark FFT plans on creation (slower to plan, faster per frame).
    bool measure_plans = true;
};

struct EngineStats {
    std::size_t sparse_frames = 0;
    std::size_t spectral_frames = 0;
    std::size_t sparse_pairs = 0;
    std::size_t spectral_pairs = 0;
};

/// Streaming accumulator for the signal map (every frame against itself) and
/// the consecutive-frame reference map (frame i against frame i+1).
///
/// Sparse frames are counted pairwise, O(ones^2). Dense frames are
/// transformed once; their (cross-)spectra are summed across frames and
/// inverted a single time when the maps are read, then rounded to integers.
class CorrelationEngine {
public:
    CorrelationEngine(CorrelationMode mode, int width, int height, EngineOptions options = {});
    ~CorrelationEngine();
    CorrelationEngine(CorrelationEngine&&) noexcept;
    CorrelationEngine& operator=(CorrelationEngine&&) noexcept;

    void add(const BinaryFrame& frame);

    CorrelationMap signal() const;
    CorrelationMap reference() const;

    std::size_t frames() const noexcept;
    const EngineStats& stats() const noexcept;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Sparse pairwise signal map.
CorrelationMap accumulate(std::span<const BinaryFrame> stack, CorrelationMode mode);
/// Sparse pairwise consecutive-frame reference map; needs >= 2 frames.
CorrelationMap reference(std::span<const BinaryFrame> stack, CorrelationMode mode);
/// Spectral signal map; identical contract to accumulate().
CorrelationMap fft_accumulate(std::span<const BinaryFrame> stack, CorrelationMode mode);
/// Spectral reference map; identical contract to reference().
CorrelationMap fft_reference(std::span<const BinaryFrame> stack, CorrelationMode mode);

/// Smallest size >= n of the form 2^a * {1, 3, 5, 7}.
int padded_fft_size(int n) noexcept;

// ---------------------------------------------------------------------------

struct MaskSet {
    /// Zero the rho'_1 = rho'_2 bin of Difference maps.
    bool central = true;
    /// Zero the Delta y' = +-1 rows of Difference maps (readout smear).
    bool smear_rows = false;
    /// Remove the ordered self-pairs recorded in the signal map's singles
    /// before subtracting the reference.
    bool self_pairs = true;
};

/// Signal minus reference at matched per-frame rates, in signal-count units.
class SubtractedMap {
public:
    SubtractedMap() = default;
    SubtractedMap(CorrelationMode mode, int frame_width, int frame_height);

    CorrelationMode mode() const noexcept { return mode_; }
    int frame_width() const noexcept { return frame_width_; }
    int frame_height() const noexcept { return frame_height_; }
    int grid_width() const noexcept { return 2 * frame_width_ - 1; }
    int grid_height() const noexcept { return 2 * frame_height_ - 1; }
    int origin_x() const noexcept { return mode_ == CorrelationMode::Difference ? frame_width_ - 1 : 0; }
    int origin_y() const noexcept { return mode_ == CorrelationMode::Difference ? frame_height_ - 1 : 0; }
    int peak_u() const noexcept { return mode_ == CorrelationMode::Difference ? 0 : frame_width_ - 1; }
    int peak_v() const noexcept { return mode_ == CorrelationMode::Difference ? 0 : frame_height_ - 1; }
    int u_min() const noexcept { return -origin_x(); }
    int u_max() const noexcept { return grid_width() - 1 - origin_x(); }
    int v_min() const noexcept { return -origin_y(); }
    int v_max() const noexcept { return grid_height() - 1 - origin_y(); }

    bool contains(int u, int v) const noexcept;
    double value(int u, int v) const;
    double& value_ref(int u, int v);
    bool is_masked(int u, int v) const;
    void mask(int u, int v);

    std::span<const double> values() const noexcept { return values_; }
    /// Masked (u, v) coordinates in insertion order.
    const std::vector<Pixel>& masked_bins() const noexcept { return masked_bins_; }

    double reference_scale = 1.0;
    std::size_t frames = 0;

private:
    std::size_t index(int u, int v) const;

    CorrelationMode mode_ = CorrelationMode::Difference;
    int frame_width_ = 0;
    int frame_height_ = 0;
    std::vector<double> values_;
    std::vector<std::uint8_t> masked_;
    std::vector<Pixel> masked_bins_;
};

SubtractedMap subtract(const CorrelationMap& signal, const CorrelationMap& ref,
                       const MaskSet& masks);

struct PeakStats {
    double signal = 0.0;
    double noise = 0.0;
    double snr = 0.0;
    int radius = 0;
    std::size_t bins = 0;
};

/// Excess counts in a (2r+1)^2 box around the expected peak, against the
/// Poisson standard deviation of that excess (signal + scale^2 * reference
/// counts in the same box). Masked bins are skipped.
PeakStats peak_snr(const SubtractedMap& sub, const CorrelationMap& signal,
                   const CorrelationMap& ref, int radius = 2);

struct Profile {
    std::vector<double> coordinate;
    std::vector<double> value;
    std::vector<std::uint8_t> masked;
};

/// Row of constant v (all u).
Profile row_profile(const SubtractedMap& sub, int v);
/// Column of constant u (all v).
Profile column_profile(const SubtractedMap& sub, int u);

// ---------------------------------------------------------------------------

enum class Axis { X, Y };

std::string_view to_string(Axis axis) noexcept;

/// J[c1][c2] over pixel columns (Axis::X) or rows (Axis::Y), row-major in c1.
struct JointDistribution {
    Axis axis = Axis::X;
    model::Plane plane = model::Plane::ImagePlane;
    int size = 0;
    std::vector<double> values;
    bool background_subtracted = false;
    std::size_t frames = 0;
    /// Set bits per coordinate summed over frames.
    std::vector<double> singles;

    double at(int c1, int c2) const {
        return values[static_cast<std::size_t>(c1) * static_cast<std::size_t>(size) +
                      static_cast<std::size_t>(c2)];
    }
    double& at(int c1, int c2) {
        return values[static_cast<std::size_t>(c1) * static_cast<std::size_t>(size) +
                      static_cast<std::size_t>(c2)];
    }
};

/// Streaming joint-distribution accumulator. Each frame is reduced to its
/// marginal count vector along `axis`; the outer products with itself and
/// with the previous frame's vector are summed.
class JointAccumulator {
public:
    JointAccumulator() = default;
    JointAccumulator(Axis axis, int width, int height);

    void add(const BinaryFrame& frame);
    /// Adds another accumulator's sums (e.g. a later block of frames). The
    /// frame pair straddling the two blocks is not counted.
    JointAccumulator& operator+=(const JointAccumulator& other);

    /// Raw ordered-pair counts with self-pairs when `with_reference` is false.
    /// With the reference, self-pairs are removed from the diagonal and the
    /// symmetrised consecutive-frame outer product is subtracted at the
    /// per-frame rate.
    JointDistribution result(model::Plane plane, bool with_reference) const;

    Axis axis() const noexcept { return axis_; }
    int size() const noexcept { return size_; }
    std::size_t frames() const noexcept { return frames_; }
    std::size_t reference_pairs() const noexcept { return reference_pairs_; }

private:
    Axis axis_ = Axis::X;
    int width_ = 0;
    int height_ = 0;
    int size_ = 0;
    std::size_t frames_ = 0;
    std::size_t reference_pairs_ = 0;
    std::vector<std::int64_t> outer_;
    std::vector<std::int64_t> cross_;
    std::vector<std::int64_t> singles_;
    std::vector<std::int32_t> previous_;
    bool has_previous_ = false;
};

JointDistribution joint_1d(std::span<const BinaryFrame> stack, Axis axis, model::Plane plane,
                           bool with_reference);

}  // namespace eprcam::correlate
