#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eprcam/correlate.hpp"

namespace eprcam::inference {

using correlate::JointDistribution;

struct FitOptions {
    /// Nonzero entries exclude the bin from the residuals. Empty = no mask.
    std::vector<std::uint8_t> mask;
    /// Per-bin least-squares weights (typically 1/variance). Empty = unit.
    std::vector<double> weights;
    bool fit_baseline = true;
    int max_iterations = 500;
    /// Convergence when the gradient norm drops below this times its initial value.
    double gradient_tolerance = 1e-9;
};

/// A exp(-(u - mean)^2 / 2 sigma^2) + baseline.
struct GaussianFit {
    double amplitude = 0.0;
    double mean = 0.0;
    double sigma = 0.0;
    double baseline = 0.0;
    double amplitude_error = 0.0;
    double mean_error = 0.0;
    double sigma_error = 0.0;
    double baseline_error = 0.0;
    double residual_norm = 0.0;
    int iterations = 0;
    std::size_t bins_used = 0;
    /// False when sigma or its error is comparable to the fit window.
    bool well_constrained = true;

    double operator()(double u) const noexcept;
    double significance() const noexcept {
        return amplitude_error > 0.0 ? amplitude / amplitude_error : 0.0;
    }
};

/// Levenberg-Marquardt fit over unmasked bins, started from moments.
/// Throws InsufficientData with fewer than 5 nonzero bins, FitFailure for
/// constant data or when the iteration budget runs out.
GaussianFit fit_gaussian(std::span<const double> coordinate, std::span<const double> counts,
                         const FitOptions& options = {});

struct Moments {
    double weight = 0.0;
    double mean = 0.0;
    double variance = 0.0;
};

/// Moments of a histogram with negative bins clamped to zero. With
/// `trim_sigmas` > 0 the moments are recomputed inside mean +- trim_sigmas *
/// sigma until stable, which suppresses far-out noise.
Moments histogram_moments(std::span<const double> coordinate, std::span<const double> counts,
                          std::span<const std::uint8_t> mask = {}, double trim_sigmas = 0.0);

// ---------------------------------------------------------------------------

enum class Direction {
    /// Delta^2(1|2): condition on c2, spread along c1.
    FirstGivenSecond,
    /// Delta^2(2|1): condition on c1, spread along c2.
    SecondGivenFirst,
};

struct InferenceOptions {
    /// Slices with conditioning weight below this fraction of the peak are skipped.
    double weight_floor = 0.01;
    /// Fits whose amplitude is below this many standard errors fall back to moments.
    double min_significance = 3.0;
    /// Exclude c1 == c2 from the slice fits.
    bool mask_diagonal = true;
    /// Variance added by pixel quantisation, in px^2, removed for the
    /// deconvolved value.
    double pixel_variance = 1.0 / 6.0;
    /// Slice fits use a window centred on the correlation ridge with this
    /// many ridge widths on each side (at least min_window bins). The ridge
    /// comes from the narrow projection (c1 - c2 in the image plane, c1 + c2
    /// in the far field); without a significant ridge the whole slice is used.
    double window_sigmas = 8.0;
    int min_window = 8;
    /// Slice fits include a free baseline.
    bool fit_baseline = false;
};

struct InferredVariance {
    /// Weighted conditional variance in crystal-plane units.
    double value = 0.0;
    /// `value` minus the pixel quantisation variance.
    double deconvolved = 0.0;
    /// Weighted conditional variance in px^2.
    double detector_px2 = 0.0;
    std::size_t slices_used = 0;
    std::size_t fitted_slices = 0;
    std::size_t moment_fallbacks = 0;
    /// Conditioning bins whose background-subtracted weight was negative.
    std::size_t clamped_bins = 0;
    /// Half-width of the slice window in bins; 0 when whole slices were used.
    int window = 0;
};

/// Discretised weighted conditional variance. `scale` converts one detector
/// pixel to crystal units (um for the image plane, hbar/um for the far field).
InferredVariance min_inferred_variance(const JointDistribution& joint, Direction direction,
                                       double scale, const InferenceOptions& options = {});

struct EprProduct {
    double product = 0.0;
    bool violation = false;
    /// (hbar^2/4) / product.
    double violation_factor = 0.0;
};

/// Violation iff product < 1/4 (hbar = 1).
EprProduct epr_product(double position_variance, double momentum_variance);

struct EprProducts {
    /// Delta^2(x1|x2) Delta^2(p1|p2).
    EprProduct first;
    /// Delta^2(x2|x1) Delta^2(p2|p1).
    EprProduct second;
    bool violation() const noexcept { return first.violation && second.violation; }
};

struct PlaneVariances {
    double first_given_second = 0.0;
    double second_given_first = 0.0;
};

/// Needs both planes; throws InsufficientData naming the missing one.
EprProducts epr_products(const std::optional<PlaneVariances>& position,
                         const std::optional<PlaneVariances>& momentum);

// ---------------------------------------------------------------------------

/// Widths of one joint distribution along c1 - c2 and c1 + c2, in px.
struct AxisWidths {
    GaussianFit difference;
    GaussianFit sum;
    /// The narrow (correlated) and wide (envelope) widths for the plane.
    double narrow_px = 0.0;
    double wide_px = 0.0;
    double narrow_error = 0.0;
    double wide_error = 0.0;
    /// Single-photon marginal: width sqrt(narrow^2 + wide^2) / 2 and centre in px.
    double marginal_sigma_px = 0.0;
    double marginal_center_px = 0.0;
    double coverage = 0.0;

    double ratio() const noexcept { return narrow_px > 0.0 ? wide_px / narrow_px : 0.0; }
    bool well_constrained() const noexcept { return difference.well_constrained && sum.well_constrained; }
};

/// Projections of a background-subtracted joint distribution onto c1 - c2
/// (c1 == c2 masked) and c1 + c2. Narrow is the difference width in the
/// image plane and the sum width in the far field. The narrow projection
/// covers the whole distribution and is fitted with a baseline; the wide one
/// is summed over a band of 8 narrow widths around the ridge and fitted
/// without a baseline.
AxisWidths projection_widths(const JointDistribution& joint, bool mask_diagonal = true);

/// Fraction of a Gaussian (px) that falls on an ROI spanning [0, roi_pixels)
/// with pixel centres at i + 0.5.
double coverage(double sigma_px, double center_px, int roi_pixels);

struct PlaneDimensionality {
    double ratio_x = 0.0;
    double ratio_y = 0.0;
    double coverage_x = 0.0;
    double coverage_y = 0.0;
    double d_max = 0.0;
    double d = 0.0;
    bool y_substituted = false;
};

struct Dimensionality {
    PlaneDimensionality position;
    PlaneDimensionality momentum;
};

struct DimensionalityInputs {
    std::optional<AxisWidths> image_x;
    std::optional<AxisWidths> image_y;
    std::optional<AxisWidths> far_x;
    std::optional<AxisWidths> far_y;
    /// Use the image-plane x widths for y.
    bool substitute_image_y = true;
};

/// D_max = ratio_x * ratio_y per plane; D = D_max * coverage_x * coverage_y.
/// Throws InsufficientData listing every missing fit.
Dimensionality dimensionality(const DimensionalityInputs& inputs);

// ---------------------------------------------------------------------------

struct VarianceEstimate {
    InferredVariance variance;
    /// Bootstrap standard error of variance.value; 0 when not computed.
    double error = 0.0;
};

struct ProductEstimate {
    EprProduct product;
    double error = 0.0;
};

/// Minimum inferred variances (x axis) for both planes, the two EPR products
/// and the dimensionality. Fields are empty when the data did not support
/// them; `notes` says why.
struct EprReport {
    std::optional<VarianceEstimate> x1_given_x2;
    std::optional<VarianceEstimate> x2_given_x1;
    std::optional<VarianceEstimate> p1_given_p2;
    std::optional<VarianceEstimate> p2_given_p1;
    std::optional<ProductEstimate> product_1;
    std::optional<ProductEstimate> product_2;
    std::optional<Dimensionality> dimensionality;
    std::vector<std::string> notes;

    /// True only when both products exist and both violate.
    bool violation() const noexcept {
        return product_1 && product_2 && product_1->product.violation && product_2->product.violation;
    }
};

// ---------------------------------------------------------------------------

/// Statistic evaluated on a resample; receives the chosen block indices
/// (with repetition).
using BlockStatistic = std::function<double(std::span<const std::size_t> blocks)>;

/// Block bootstrap: standard deviation of `statistic` over `resamples`
/// resamples of `blocks` contiguous frame blocks. Needs >= 10 blocks.
double bootstrap_error(std::size_t blocks, const BlockStatistic& statistic,
                       std::size_t resamples, std::uint64_t seed);

}  // namespace eprcam::inference
