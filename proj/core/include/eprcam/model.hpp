#pragma once

#include <optional>
#include <string_view>

//! Physical parameters of the pair source and the relay optics, together with
//! the closed-form predictions of the double-Gaussian biphoton model.
//!
//! Conventions: lengths in um, momenta in hbar/um with hbar = 1, so every
//! position-momentum product is a plain multiple of hbar^2.
namespace eprcam::model {

/// Pump and crystal parameters for degenerate type-I down-conversion.
struct SourceParams {
    double pump_wavelength_nm = 355.0;
    /// Pump field standard deviation; identified with the sum-coordinate width.
    double pump_waist_um = 660.0;
    double crystal_length_mm = 5.0;
    double alpha = 0.455;

    /// Degenerate down-converted wavelength, twice the pump wavelength.
    double dc_wavelength_nm() const noexcept { return 2.0 * pump_wavelength_nm; }
    /// k = 2 pi / lambda = k_p / 2, in rad/um.
    double dc_wavenumber_per_um() const noexcept;

    void validate() const;
};

/// Correlation widths of the biphoton amplitude plus the down-converted
/// wavenumber needed for the far-field mapping.
struct Biphoton {
    double sigma_plus_um = 0.0;
    double sigma_minus_um = 0.0;
    double wavenumber_per_um = 0.0;

    static Biphoton from(const SourceParams& p);
    void validate() const;
};

enum class Plane { ImagePlane, FarField };

std::string_view to_string(Plane plane) noexcept;
Plane plane_from_string(std::string_view text);

/// Relay optics between the crystal and the detector. Exactly one of
/// magnification / effective focal length is set, matching `plane`.
class OpticalSystem {
public:
    static OpticalSystem image_plane(double magnification);
    static OpticalSystem far_field(double effective_focal_mm);

    Plane plane() const noexcept { return plane_; }
    std::optional<double> magnification() const noexcept { return magnification_; }
    std::optional<double> effective_focal_mm() const noexcept { return focal_mm_; }
    double effective_focal_um() const;

    /// Detector-to-crystal conversion: 1/M (um per um) for the image plane,
    /// k/f_e (hbar/um per um) for the far field.
    double scale(double wavenumber_per_um) const noexcept;

    /// Crystal-plane coordinate (um, or hbar/um in the far field) to detector um.
    double to_detector(double crystal_coordinate, double wavenumber_per_um) const noexcept {
        return crystal_coordinate / scale(wavenumber_per_um);
    }

private:
    OpticalSystem(Plane plane, std::optional<double> m, std::optional<double> f)
        : plane_(plane), magnification_(m), focal_mm_(f) {}

    Plane plane_;
    std::optional<double> magnification_;
    std::optional<double> focal_mm_;
};

struct CorrelationLengths {
    double sigma_pos_um = 0.0;
    double sigma_mom_um = 0.0;
};

struct ConditionalVariances {
    /// Delta^2(x1|x2), um^2.
    double position_um2 = 0.0;
    /// Delta^2(p1|p2), hbar^2/um^2.
    double momentum_per_um2 = 0.0;

    double product() const noexcept { return position_um2 * momentum_per_um2; }
};

struct AnalyticPrediction {
    double sigma_minus_um = 0.0;
    double sigma_pos_um = 0.0;
    double sigma_mom_um = 0.0;
    double mode_count = 0.0;
    double cond_var_x_um2 = 0.0;
    double cond_var_p_per_um2 = 0.0;
    double epr_product = 0.0;
};

/// sqrt(alpha L lambda_p / 2 pi), returned in um.
double derive_sigma_minus(const SourceParams& p);

CorrelationLengths predicted_correlation_lengths(const SourceParams& p,
                                                 const OpticalSystem& image,
                                                 const OpticalSystem& far_field);

double predicted_mode_count(const SourceParams& p);
double mode_count(double sigma_plus_um, double sigma_minus_um);

ConditionalVariances analytic_conditional_variances(const SourceParams& p);
ConditionalVariances analytic_conditional_variances(double sigma_plus_um,
                                                    double sigma_minus_um);

AnalyticPrediction predict(const SourceParams& p, const OpticalSystem& image,
                           const OpticalSystem& far_field);

}  // namespace eprcam::model
