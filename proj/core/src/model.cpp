#include "eprcam/model.hpp"

#include <cmath>
#include <string>

#include "eprcam/error.hpp"
#include "eprcam/units.hpp"

namespace eprcam::model {

namespace {

void require_positive(double value, const char* name) {
    require(std::isfinite(value) && value > 0.0, ErrorKind::InvalidParameter,
            std::string(name) + " must be positive and finite");
}

}  // namespace

double SourceParams::dc_wavenumber_per_um() const noexcept {
    return 2.0 * units::pi / (dc_wavelength_nm() * units::um_per_nm);
}

void SourceParams::validate() const {
    require_positive(pump_wavelength_nm, "pump_wavelength");
    require_positive(pump_waist_um, "pump_waist");
    require_positive(crystal_length_mm, "crystal_length");
    require_positive(alpha, "alpha");
}

Biphoton Biphoton::from(const SourceParams& p) {
    return Biphoton{p.pump_waist_um, derive_sigma_minus(p), p.dc_wavenumber_per_um()};
}

void Biphoton::validate() const {
    require_positive(sigma_plus_um, "sigma_plus");
    require_positive(sigma_minus_um, "sigma_minus");
    require_positive(wavenumber_per_um, "wavenumber");
}

std::string_view to_string(Plane plane) noexcept {
    return plane == Plane::ImagePlane ? "image" : "far_field";
}

Plane plane_from_string(std::string_view text) {
    if (text == "image" || text == "image_plane") {
        return Plane::ImagePlane;
    }
    if (text == "far_field" || text == "farfield") {
        return Plane::FarField;
    }
    fail(ErrorKind::InvalidParameter, "unknown plane '" + std::string(text) + "'");
}

OpticalSystem OpticalSystem::image_plane(double magnification) {
    require_positive(magnification, "magnification");
    return OpticalSystem(Plane::ImagePlane, magnification, std::nullopt);
}

OpticalSystem OpticalSystem::far_field(double effective_focal_mm) {
    require_positive(effective_focal_mm, "effective_focal_length");
    return OpticalSystem(Plane::FarField, std::nullopt, effective_focal_mm);
}

double OpticalSystem::effective_focal_um() const {
    require(focal_mm_.has_value(), ErrorKind::InvalidParameter,
            "effective focal length is only defined for the far-field system");
    return *focal_mm_ * units::um_per_mm;
}

double OpticalSystem::scale(double wavenumber_per_um) const noexcept {
    if (plane_ == Plane::ImagePlane) {
        return 1.0 / *magnification_;
    }
    return wavenumber_per_um / (*focal_mm_ * units::um_per_mm);
}

double derive_sigma_minus(const SourceParams& p) {
    p.validate();
    const double length_um = p.crystal_length_mm * units::um_per_mm;
    const double pump_um = p.pump_wavelength_nm * units::um_per_nm;
    return std::sqrt(p.alpha * length_um * pump_um / (2.0 * units::pi));
}

CorrelationLengths predicted_correlation_lengths(const SourceParams& p,
                                                 const OpticalSystem& image,
                                                 const OpticalSystem& far_field) {
    require(image.plane() == Plane::ImagePlane, ErrorKind::InvalidParameter,
            "first optical system must be the image-plane system");
    require(far_field.plane() == Plane::FarField, ErrorKind::InvalidParameter,
            "second optical system must be the far-field system");
    const double sigma_minus = derive_sigma_minus(p);
    return CorrelationLengths{
        *image.magnification() * sigma_minus,
        far_field.effective_focal_um() / (p.dc_wavenumber_per_um() * p.pump_waist_um),
    };
}

double mode_count(double sigma_plus_um, double sigma_minus_um) {
    require_positive(sigma_plus_um, "sigma_plus");
    require_positive(sigma_minus_um, "sigma_minus");
    const double ratio = sigma_plus_um / sigma_minus_um;
    return ratio * ratio;
}

double predicted_mode_count(const SourceParams& p) {
    return mode_count(p.pump_waist_um, derive_sigma_minus(p));
}

ConditionalVariances analytic_conditional_variances(double sigma_plus_um,
                                                    double sigma_minus_um) {
    require_positive(sigma_plus_um, "sigma_plus");
    require_positive(sigma_minus_um, "sigma_minus");
    // Per axis, s = x1 + x2 ~ N(0, s+^2) and d = x1 - x2 ~ N(0, s-^2)
    // independently; the momentum-space amplitude has the reciprocal widths.
    const double sp2 = sigma_plus_um * sigma_plus_um;
    const double sm2 = sigma_minus_um * sigma_minus_um;
    return ConditionalVariances{sp2 * sm2 / (sp2 + sm2), 1.0 / (sp2 + sm2)};
}

ConditionalVariances analytic_conditional_variances(const SourceParams& p) {
    return analytic_conditional_variances(p.pump_waist_um, derive_sigma_minus(p));
}

AnalyticPrediction predict(const SourceParams& p, const OpticalSystem& image,
                           const OpticalSystem& far_field) {
    const auto lengths = predicted_correlation_lengths(p, image, far_field);
    const auto cond = analytic_conditional_variances(p);
    return AnalyticPrediction{
        derive_sigma_minus(p),
        lengths.sigma_pos_um,
        lengths.sigma_mom_um,
        predicted_mode_count(p),
        cond.position_um2,
        cond.momentum_per_um2,
        cond.product(),
    };
}

}  // namespace eprcam::model
