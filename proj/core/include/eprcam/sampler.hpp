#pragma once

#include <string_view>
#include <vector>

#include "eprcam/model.hpp"
#include "eprcam/rng.hpp"

namespace eprcam::sampler {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

/// One down-converted pair mapped to continuous detector coordinates (um,
/// measured from the optical axis).
struct PairEvent {
    Vec2 r1;
    Vec2 r2;
    bool survived1 = true;
    bool survived2 = true;
};

enum class Attenuation { BeforeCrystal, AfterCrystal };

std::string_view to_string(Attenuation a) noexcept;
Attenuation attenuation_from_string(std::string_view text);

/// Pair loading and attenuator placement.
///
/// `heralding_efficiency` is the attenuator transmission. Before the crystal
/// it thins the pair rate; after the crystal it is an independent survival
/// probability for every photon, which is what destroys the heralding.
struct FluxConfig {
    double mean_pairs_per_frame = 0.0;
    double heralding_efficiency = 1.0;
    Attenuation attenuation = Attenuation::BeforeCrystal;

    void validate() const;

    /// Poisson mean of generated pairs after a before-crystal attenuator.
    double generated_pairs_mean() const noexcept;
    /// Per-photon survival probability through an after-crystal attenuator.
    double photon_survival() const noexcept;
    /// Expected photons leaving the attenuator per frame.
    double expected_photons() const noexcept;

    /// Configuration delivering `photons_per_frame` detected photons on
    /// average for a detector of quantum efficiency `qe`, with the attenuator
    /// of transmission `transmission` in the given position. After-crystal
    /// attenuation raises the pair rate by 1/transmission to keep the flux.
    static FluxConfig for_detected_flux(double photons_per_frame, double qe,
                                        double transmission, Attenuation attenuation);
};

/// Draws one pair from |Psi|^2 (image plane) or |Psi~|^2 (far field) and maps
/// it onto the detector. Survival flags are left true.
PairEvent sample_pair(const model::OpticalSystem& optics, const model::Biphoton& source,
                      rng::Engine& rng);

/// Poisson-many pairs with attenuator losses applied; returns the surviving
/// impact coordinates in generation order (photon 1 before photon 2).
std::vector<Vec2> generate_frame_events(const FluxConfig& flux,
                                        const model::OpticalSystem& optics,
                                        const model::Biphoton& source, rng::Engine& rng);

}  // namespace eprcam::sampler
