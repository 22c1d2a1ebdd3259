#include "eprcam/sampler.hpp"

#include <cmath>
#include <string>

#include <boost/random/bernoulli_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/poisson_distribution.hpp>

#include "eprcam/error.hpp"

namespace eprcam::sampler {

std::string_view to_string(Attenuation a) noexcept {
    return a == Attenuation::BeforeCrystal ? "before_crystal" : "after_crystal";
}

Attenuation attenuation_from_string(std::string_view text) {
    if (text == "before_crystal") return Attenuation::BeforeCrystal;
    if (text == "after_crystal") return Attenuation::AfterCrystal;
    fail(ErrorKind::Schema, "unknown attenuation mode '" + std::string(text) + "'");
}

void FluxConfig::validate() const {
    require(std::isfinite(mean_pairs_per_frame) && mean_pairs_per_frame >= 0.0,
            ErrorKind::InvalidParameter, "mean_pairs_per_frame must be >= 0");
    require(heralding_efficiency >= 0.0 && heralding_efficiency <= 1.0,
            ErrorKind::InvalidParameter, "heralding_efficiency must lie in [0, 1]");
}

double FluxConfig::generated_pairs_mean() const noexcept {
    return attenuation == Attenuation::BeforeCrystal
               ? mean_pairs_per_frame * heralding_efficiency
               : mean_pairs_per_frame;
}

double FluxConfig::photon_survival() const noexcept {
    return attenuation == Attenuation::AfterCrystal ? heralding_efficiency : 1.0;
}

double FluxConfig::expected_photons() const noexcept {
    return 2.0 * generated_pairs_mean() * photon_survival();
}

FluxConfig FluxConfig::for_detected_flux(double photons_per_frame, double qe,
                                         double transmission, Attenuation attenuation) {
    require(qe > 0.0 && qe <= 1.0, ErrorKind::InvalidParameter, "qe must lie in (0, 1]");
    require(transmission > 0.0 && transmission <= 1.0, ErrorKind::InvalidParameter,
            "transmission must lie in (0, 1]");
    require(photons_per_frame >= 0.0, ErrorKind::InvalidParameter,
            "photon flux must be >= 0");
    FluxConfig flux{photons_per_frame / (2.0 * qe * transmission), transmission, attenuation};
    flux.validate();
    return flux;
}

PairEvent sample_pair(const model::OpticalSystem& optics, const model::Biphoton& source,
                      rng::Engine& rng) {
    double sum_sigma = 0.0;
    double diff_sigma = 0.0;
    if (optics.plane() == model::Plane::ImagePlane) {
        sum_sigma = source.sigma_plus_um;
        diff_sigma = source.sigma_minus_um;
    } else {
        // Conjugate widths, hbar = 1.
        sum_sigma = 1.0 / source.sigma_plus_um;
        diff_sigma = 1.0 / source.sigma_minus_um;
    }
    boost::random::normal_distribution<double> sum_dist(0.0, sum_sigma);
    boost::random::normal_distribution<double> diff_dist(0.0, diff_sigma);
    const double k = source.wavenumber_per_um;

    auto axis = [&](double& c1, double& c2) {
        const double s = sum_dist(rng);
        const double d = diff_dist(rng);
        c1 = optics.to_detector(0.5 * (s + d), k);
        c2 = optics.to_detector(0.5 * (s - d), k);
    };

    PairEvent ev;
    axis(ev.r1.x, ev.r2.x);
    axis(ev.r1.y, ev.r2.y);
    return ev;
}

std::vector<Vec2> generate_frame_events(const FluxConfig& flux,
                                        const model::OpticalSystem& optics,
                                        const model::Biphoton& source, rng::Engine& rng) {
    std::vector<Vec2> impacts;
    const double mean = flux.generated_pairs_mean();
    if (mean <= 0.0) {
        return impacts;
    }
    boost::random::poisson_distribution<long, double> pairs_dist(mean);
    const long pairs = pairs_dist(rng);
    const double survival = flux.photon_survival();
    boost::random::bernoulli_distribution<double> survive(survival);
    impacts.reserve(static_cast<std::size_t>(2.0 * static_cast<double>(pairs) * survival + 8.0));
    for (long i = 0; i < pairs; ++i) {
        PairEvent ev = sample_pair(optics, source, rng);
        if (survival < 1.0) {
            ev.survived1 = survive(rng);
            ev.survived2 = survive(rng);
        }
        if (ev.survived1) impacts.push_back(ev.r1);
        if (ev.survived2) impacts.push_back(ev.r2);
    }
    return impacts;
}

}  // namespace eprcam::sampler
