#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "eprcam/error.hpp"
#include "eprcam/model.hpp"

using namespace eprcam;
using namespace eprcam::model;

namespace {

SourceParams defaults() { return SourceParams{}; }

// Var(x1 | x2) of |Psi|^2 on a grid, with the sum/difference Gaussian written
// directly in (x1, x2).
double numeric_conditional_variance(double sp, double sm, double x2) {
    const double span = 8.0 * sm;
    const int n = 4001;
    double w = 0.0, m1 = 0.0, m2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x1 = x2 - span + 2.0 * span * i / (n - 1);
        const double s = x1 + x2, d = x1 - x2;
        const double p = std::exp(-s * s / (2 * sp * sp) - d * d / (2 * sm * sm));
        w += p;
        m1 += p * x1;
        m2 += p * x1 * x1;
    }
    m1 /= w;
    return m2 / w - m1 * m1;
}

}  // namespace

TEST(Model, SigmaMinusClosedForm) {
    const auto p = defaults();
    const double expected = std::sqrt(0.455 * 5000.0 * 0.355 / (2.0 * std::numbers::pi));
    EXPECT_NEAR(derive_sigma_minus(p), expected, 1e-12);
    EXPECT_NEAR(derive_sigma_minus(p), 11.3, 0.2);
}

TEST(Model, PaperCorrelationLengths) {
    const auto p = defaults();
    const auto l = predicted_correlation_lengths(p, OpticalSystem::image_plane(2.5),
                                                 OpticalSystem::far_field(100.0));
    EXPECT_NEAR(l.sigma_pos_um, 28.3, 0.5);
    EXPECT_NEAR(l.sigma_mom_um, 17.1, 0.3);
    // f / (k sigma_+) with k = 2 pi / 710 nm.
    const double k = 2.0 * std::numbers::pi / 0.710;
    EXPECT_NEAR(l.sigma_mom_um, 100000.0 / (k * 660.0), 1e-9);
}

TEST(Model, ModeCountNearPaperValue) {
    const double d = predicted_mode_count(defaults());
    EXPECT_GE(d, 3300.0);
    EXPECT_LE(d, 3500.0);
    EXPECT_DOUBLE_EQ(mode_count(10.0, 10.0), 1.0);
}

TEST(Model, ConditionalVarianceMatchesQuadrature) {
    const double sp = 60.0, sm = 7.0;
    const auto cv = analytic_conditional_variances(sp, sm);
    for (double x2 : {0.0, 25.0, -80.0}) {
        EXPECT_NEAR(numeric_conditional_variance(sp, sm, x2), cv.position_um2, 1e-6 * cv.position_um2);
    }
}

TEST(Model, MomentumVarianceIsReciprocal) {
    // The momentum amplitude has widths 1/sigma_+ and 1/sigma_-; the quadrature
    // oracle applies with those widths.
    const double sp = 660.0, sm = 11.3;
    const auto cv = analytic_conditional_variances(sp, sm);
    EXPECT_NEAR(numeric_conditional_variance(1.0 / sp, 1.0 / sm, 0.0), cv.momentum_per_um2,
                1e-6 * cv.momentum_per_um2);
}

TEST(Model, AnalyticProduct) {
    const auto pred = predict(defaults(), OpticalSystem::image_plane(2.5), OpticalSystem::far_field(100.0));
    EXPECT_NEAR(pred.epr_product, 2.95e-4, 0.05e-4);
    // For sigma_+ >> sigma_- the product tends to (sigma_- / sigma_+)^2.
    EXPECT_NEAR(pred.epr_product, 1.0 / pred.mode_count, 1e-3 / pred.mode_count);
    EXPECT_LT(pred.epr_product, 0.25);
}

TEST(Model, ProductNeverBelowUncertaintyBoundForSeparableLimit) {
    // sigma_+ == sigma_- is the uncorrelated state: product (1/2)^2 = 0.25.
    const auto cv = analytic_conditional_variances(5.0, 5.0);
    EXPECT_NEAR(cv.product(), 0.25, 1e-12);
}

TEST(Model, ScaleConversions) {
    const auto ip = OpticalSystem::image_plane(2.5);
    const auto ff = OpticalSystem::far_field(100.0);
    const double k = defaults().dc_wavenumber_per_um();
    EXPECT_NEAR(k, 8.8496, 1e-4);
    EXPECT_DOUBLE_EQ(ip.scale(k), 0.4);
    EXPECT_NEAR(ff.scale(k) * 16.0, 1.416e-3, 1e-6);
    EXPECT_NEAR(ip.to_detector(10.0, k), 25.0, 1e-12);
}

TEST(Model, InvalidParametersRejected) {
    SourceParams p;
    p.alpha = 0.0;
    EXPECT_THROW(derive_sigma_minus(p), Error);
    EXPECT_THROW(OpticalSystem::image_plane(-1.0), Error);
    EXPECT_THROW(OpticalSystem::image_plane(2.5).effective_focal_um(), Error);
    EXPECT_THROW(mode_count(1.0, 0.0), Error);
    EXPECT_THROW(plane_from_string("sideways"), Error);
    EXPECT_EQ(plane_from_string("far_field"), Plane::FarField);
}
