// Acceptance run: one PASS/FAIL line per criterion on stdout, progress on
// stderr. Exit status is nonzero when any criterion fails.

#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "eprcam/config.hpp"
#include "eprcam/correlate.hpp"
#include "eprcam/model.hpp"
#include "eprcam/pipeline.hpp"
#include "eprcam/rng.hpp"
#include "eprcam/sampler.hpp"

using namespace eprcam;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void verdict(int id, const char* name, bool pass, const std::string& detail) {
    std::printf("%s criterion %d (%s): %s\n", pass ? "PASS" : "FAIL", id, name, detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

[[gnu::format(printf, 1, 2)]] std::string fmt(const char* f, ...) {
    char buf[512];
    va_list args;
    va_start(args, f);
    std::vsnprintf(buf, sizeof buf, f, args);
    va_end(args);
    return buf;
}

bool within(double v, double target, double tol) { return std::abs(v - target) <= tol; }

config::RunConfig default_config() {
    return config::load(std::filesystem::path(EPRCAM_SOURCE_DIR) / "configs" / "default.json");
}

void analytic() {
    const auto t0 = Clock::now();
    const auto cfg = default_config();
    const auto p = model::predict(cfg.source, cfg.optics.image_plane(), cfg.optics.far_field());
    const double dt = seconds_since(t0);
    const bool ok = within(p.sigma_minus_um, 11.3, 0.2) && within(p.sigma_pos_um, 28.3, 0.5) &&
                    within(p.sigma_mom_um, 17.1, 0.3) && p.mode_count >= 3300 && p.mode_count <= 3500 &&
                    within(p.epr_product, 2.95e-4, 0.05e-4) && dt < 1.0;
    verdict(1, "analytic reproduction", ok,
            fmt("sigma_- %.3f um, sigma_pos %.2f um, sigma_mom %.2f um, modes %.0f, product %.3e in %.3f s",
                p.sigma_minus_um, p.sigma_pos_um, p.sigma_mom_um, p.mode_count, p.epr_product, dt));
}

// Excess at the dy = +-1 bins relative to the dx = +-1 bins of a Difference map.
double smear_ratio(const correlate::SubtractedMap& m) {
    const double rows = m.value(0, 1) + m.value(0, -1);
    const double cols = m.value(1, 0) + m.value(-1, 0);
    return cols != 0.0 ? rows / cols : INFINITY;
}

void desk_scale(const pipeline::RunResult& run, double seconds) {
    const auto cfg = run.config;
    const auto p = model::predict(cfg.source, cfg.optics.image_plane(), cfg.optics.far_field());
    const auto& ip = *run.image;
    const auto& ff = *run.far;
    auto width_ok = [](double measured, double expected) { return std::abs(measured / expected - 1.0) <= 0.25; };
    const bool widths = width_ok(ip.peak_widths.sigma_u_um, p.sigma_pos_um) &&
                        width_ok(ip.peak_widths.sigma_v_um, p.sigma_pos_um) &&
                        width_ok(ff.peak_widths.sigma_u_um, p.sigma_mom_um) &&
                        width_ok(ff.peak_widths.sigma_v_um, p.sigma_mom_um);
    const bool snr = ip.peak.snr > 5.0 && ff.peak.snr > 5.0;
    verdict(2, "desk-scale pipeline", widths && snr && seconds < 120.0,
            fmt("SNR %.0f / %.0f; widths %.2f x %.2f um (pos %.2f), %.2f x %.2f um (mom %.2f); %zu+%zu frames "
                "in %.1f s",
                ip.peak.snr, ff.peak.snr, ip.peak_widths.sigma_u_um, ip.peak_widths.sigma_v_um, p.sigma_pos_um,
                ff.peak_widths.sigma_u_um, ff.peak_widths.sigma_v_um, p.sigma_mom_um, ip.frames, ff.frames,
                seconds));
}

void violation(const pipeline::RunResult& run) {
    const auto& r = run.report;
    if (!r.product_1 || !r.product_2) {
        verdict(3, "EPR violation", false, "products unavailable");
        return;
    }
    const double a = r.product_1->product.product, b = r.product_2->product.product;
    const bool ok = r.violation() && a <= 0.25e-2 && b <= 0.25e-2;
    verdict(3, "EPR violation", ok,
            fmt("products %.3e +- %.1e and %.3e +- %.1e hbar^2 (bound 0.25, factor %.0f / %.0f), flag %s", a,
                r.product_1->error, b, r.product_2->error, r.product_1->product.violation_factor,
                r.product_2->product.violation_factor, r.violation() ? "true" : "false"));
}

void control(const pipeline::RunResult& baseline) {
    auto cfg = default_config();
    // 2% heralding: the attenuator transmission times the detector efficiency.
    cfg.flux.attenuation = sampler::Attenuation::AfterCrystal;
    cfg.flux.transmission = 0.02 / cfg.camera.qe;
    std::fprintf(stderr, "control run (after-crystal transmission %.3f)...\n", cfg.flux.transmission);
    const auto low = pipeline::run_simulated(cfg);

    auto smear_cfg = default_config();
    smear_cfg.camera.smear_prob = 0.2;
    smear_cfg.frames.image_plane = 5000;
    std::fprintf(stderr, "smear run (smear_prob %.2f)...\n", smear_cfg.camera.smear_prob);
    const auto smeared = pipeline::run_simulated(smear_cfg, true, false);

    const double clean_ratio = smear_ratio(baseline.image->subtracted);
    const double smear = smear_ratio(smeared.image->subtracted);
    const bool snr_low = low.image->peak.snr < 2.0 && low.far->peak.snr < 2.0;
    const bool no_flag = !low.report.violation();
    const bool artifact = smear > 3.0 && std::abs(clean_ratio - 1.0) < 0.5;
    verdict(4, "control experiment", snr_low && no_flag && artifact,
            fmt("2%% heralding: SNR %.1f / %.1f (need < 2), EPR flag %s; dy=+-1 excess ratio %.2f with smear, "
                "%.2f without",
                low.image->peak.snr, low.far->peak.snr, low.report.violation() ? "true" : "false", smear,
                clean_ratio));
}

void oracle_equivalence() {
    std::mt19937_64 gen(2024);
    std::uniform_int_distribution<int> dim(1, 256), nframes(2, 4);
    std::uniform_real_distribution<double> occ(0.0, 0.1);
    int matched = 0, bins = 0;
    const auto t0 = Clock::now();
    for (int t = 0; t < 100; ++t) {
        const int w = dim(gen), h = dim(gen), n = nframes(gen);
        std::bernoulli_distribution bit(occ(gen));
        std::vector<emccd::BinaryFrame> stack;
        for (int f = 0; f < n; ++f) {
            emccd::BinaryFrame frame(w, h);
            for (auto& b : frame.bits) b = bit(gen);
            stack.push_back(std::move(frame));
        }
        bool same = true;
        for (auto mode : {correlate::CorrelationMode::Difference, correlate::CorrelationMode::Sum}) {
            same = same && correlate::fft_accumulate(stack, mode) == correlate::accumulate(stack, mode) &&
                   correlate::fft_reference(stack, mode) == correlate::reference(stack, mode);
        }
        bins += (2 * w - 1) * (2 * h - 1);
        matched += same;
    }
    verdict(5, "oracle equivalence", matched == 100,
            fmt("%d/100 stacks bin-exact (signal and reference, both modes, %d bins per mode) in %.1f s", matched,
                bins, seconds_since(t0)));
}

void sampler_statistics() {
    const model::SourceParams src;
    const auto biphoton = model::Biphoton::from(src);
    const int n = 1'000'000;
    bool ok = true;
    std::string detail;
    for (auto plane : {model::Plane::ImagePlane, model::Plane::FarField}) {
        const auto optics = plane == model::Plane::ImagePlane ? model::OpticalSystem::image_plane(2.5)
                                                              : model::OpticalSystem::far_field(100.0);
        // Detector-plane widths of x1 + x2 and x1 - x2 from the biphoton widths.
        const double to_det = 1.0 / optics.scale(biphoton.wavenumber_per_um);
        const double sum_sd = plane == model::Plane::ImagePlane ? to_det * biphoton.sigma_plus_um
                                                                : to_det / biphoton.sigma_plus_um;
        const double diff_sd = plane == model::Plane::ImagePlane ? to_det * biphoton.sigma_minus_um
                                                                 : to_det / biphoton.sigma_minus_um;
        auto rng = rng::make_engine(6, rng::Stream::Test, static_cast<std::uint64_t>(plane));
        double s[4] = {0, 0, 0, 0}, q[4] = {0, 0, 0, 0};
        for (int i = 0; i < n; ++i) {
            const auto e = sampler::sample_pair(optics, biphoton, rng);
            const double v[4] = {e.r1.x + e.r2.x, e.r1.x - e.r2.x, e.r1.y + e.r2.y, e.r1.y - e.r2.y};
            for (int k = 0; k < 4; ++k) {
                s[k] += v[k];
                q[k] += v[k] * v[k];
            }
        }
        const char* names[4] = {"sum x", "diff x", "sum y", "diff y"};
        for (int k = 0; k < 4; ++k) {
            const double mean = s[k] / n;
            const double var = (q[k] - n * mean * mean) / (n - 1);
            const double expected = std::pow(k % 2 == 0 ? sum_sd : diff_sd, 2);
            const double z = (var - expected) / (expected * std::sqrt(2.0 / (n - 1)));
            ok = ok && std::abs(z) < 3.0;
            detail += fmt("%s%s %s z=%+.2f", detail.empty() ? "" : ", ",
                          plane == model::Plane::ImagePlane ? "IP" : "FF", names[k], z);
        }
    }
    verdict(6, "sampler statistics", ok, "10^6 pairs per plane: " + detail);
}

void dimensionality(const pipeline::RunResult& run) {
    const auto& r = run.report;
    if (!r.dimensionality) {
        verdict(7, "dimensionality", false, "dimensionality unavailable");
        return;
    }
    const double modes = model::predicted_mode_count(run.config.source);
    const auto& pos = r.dimensionality->position;
    const auto& mom = r.dimensionality->momentum;
    const double ep = modes * pos.coverage_x * pos.coverage_y;
    const double em = modes * mom.coverage_x * mom.coverage_y;
    const bool ok = std::abs(pos.d / ep - 1.0) <= 0.3 && std::abs(mom.d / em - 1.0) <= 0.3 && mom.d >= 1750 &&
                    mom.d <= 3250;
    verdict(7, "dimensionality", ok,
            fmt("D_pos %.0f (expected %.0f), D_mom %.0f (expected %.0f, window 1750-3250)", pos.d, ep, mom.d, em));
}

void noise_calibration() {
    auto cfg = default_config();
    cfg.frames.dark = 10000;
    std::fprintf(stderr, "calibrating on %zu dark frames...\n", cfg.frames.dark);
    const auto dark = pipeline::calibrate_dark(cfg);
    // Occupancy on dark frames the calibration never saw.
    double occ = 0.0;
    const int fresh = 500;
    for (int i = 0; i < fresh; ++i) {
        const auto f = pipeline::dark_frame(cfg, cfg.frames.dark + i);
        occ += emccd::threshold(f, dark.calibration, dark.threshold_k).occupancy();
    }
    occ /= fresh;
    const auto& c = dark.calibration;
    const bool ok = within(c.readout_center, 390.0, 0.1) && within(c.sigma_noise, 6.0, 0.1) &&
                    within(dark.dark_occupancy, 0.02, 0.002) && within(occ, 0.02, 0.002);
    verdict(8, "noise calibration", ok,
            fmt("mu %.3f e-, sigma %.3f e-, k %.3f, dark occupancy %.4f (calibration) / %.4f (%d fresh frames)",
                c.readout_center, c.sigma_noise, dark.threshold_k, dark.dark_occupancy, occ, fresh));
}

}  // namespace

int main() {
    analytic();

    std::fprintf(stderr, "desk-scale run...\n");
    const auto t0 = Clock::now();
    const auto run = pipeline::run_simulated(default_config());
    const double seconds = seconds_since(t0);
    desk_scale(run, seconds);
    violation(run);
    control(run);
    oracle_equivalence();
    sampler_statistics();
    dimensionality(run);
    noise_calibration();

    std::printf("%d of 8 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
