#include "eprcam/emccd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <boost/random/bernoulli_distribution.hpp>
#include <boost/random/exponential_distribution.hpp>
#include <boost/random/geometric_distribution.hpp>
#include <boost/random/normal_distribution.hpp>

#include "eprcam/error.hpp"

namespace eprcam::emccd {

namespace {

constexpr double kFixedPointScale = 256.0;

bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

void require_probability(double p, const char* name) {
    require(is_probability(p), ErrorKind::InvalidParameter,
            std::string(name) + " must lie in [0, 1]");
}

double quantise(double electrons) {
    return std::round(electrons * kFixedPointScale) / kFixedPointScale;
}

/// Calls `hit(index)` for each index in [0, n) selected by independent
/// Bernoulli(p) trials, skipping geometrically between hits.
template <typename Hit>
void bernoulli_scan(std::size_t n, double p, rng::Engine& rng, Hit&& hit) {
    if (p <= 0.0 || n == 0) {
        return;
    }
    if (p >= 1.0) {
        for (std::size_t i = 0; i < n; ++i) hit(i);
        return;
    }
    boost::random::geometric_distribution<long long, double> gap(p);
    std::size_t i = static_cast<std::size_t>(gap(rng));
    while (i < n) {
        hit(i);
        i += 1 + static_cast<std::size_t>(gap(rng));
    }
}

class Amplifier {
public:
    explicit Amplifier(const CameraParams& cam)
        : deterministic_(cam.gain_model == GainModel::Deterministic),
          gain_(cam.em_gain),
          draw_(1.0 / cam.em_gain) {}

    double operator()(rng::Engine& rng) { return deterministic_ ? gain_ : draw_(rng); }

private:
    bool deterministic_;
    double gain_;
    boost::random::exponential_distribution<double> draw_;
};

}  // namespace

void CameraParams::validate() const {
    require(std::isfinite(pixel_pitch_um) && pixel_pitch_um > 0.0, ErrorKind::InvalidParameter,
            "pixel_pitch must be positive");
    require(width > 0 && height > 0, ErrorKind::InvalidParameter, "roi dimensions must be positive");
    require_probability(qe, "qe");
    require_probability(tail_prob, "tail_prob");
    require_probability(cic_prob, "cic_prob");
    require_probability(smear_prob, "smear_prob");
    require(em_gain >= 1.0, ErrorKind::InvalidParameter, "em_gain must be >= 1");
    require(readout_sigma >= 0.0, ErrorKind::InvalidParameter, "readout_sigma must be >= 0");
    require(tail_scale > 0.0, ErrorKind::InvalidParameter, "tail_scale must be positive");
    require(full_well > 0.0, ErrorKind::InvalidParameter, "full_well must be positive");
    require(threshold_k >= 0.0, ErrorKind::InvalidParameter, "threshold_k must be >= 0");
}

std::size_t BinaryFrame::count() const noexcept {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

double BinaryFrame::occupancy() const noexcept {
    return bits.empty() ? 0.0 : static_cast<double>(count()) / static_cast<double>(bits.size());
}

std::vector<Pixel> BinaryFrame::ones() const {
    std::vector<Pixel> out;
    for (int y = 0; y < height; ++y) {
        const std::uint8_t* row = bits.data() + static_cast<std::size_t>(y) * width;
        for (int x = 0; x < width; ++x) {
            if (row[x]) out.push_back({x, y});
        }
    }
    return out;
}

int pixel_column(double x_um, const CameraParams& cam) noexcept {
    const double c = std::floor(x_um / cam.pixel_pitch_um + 0.5 * cam.width);
    return (c >= 0.0 && c < cam.width) ? static_cast<int>(c) : -1;
}

int pixel_row(double y_um, const CameraParams& cam) noexcept {
    const double r = std::floor(y_um / cam.pixel_pitch_um + 0.5 * cam.height);
    return (r >= 0.0 && r < cam.height) ? static_cast<int>(r) : -1;
}

RawFrame expose(std::span<const sampler::Vec2> impacts, const CameraParams& cam,
                rng::Engine& rng, ExposureStats* stats) {
    ExposureStats local;
    RawFrame frame(cam.width, cam.height);
    Amplifier amplify(cam);
    boost::random::bernoulli_distribution<double> detect(cam.qe);
    boost::random::bernoulli_distribution<double> smear(cam.smear_prob);

    local.impacts = impacts.size();
    for (const auto& r : impacts) {
        const int x = pixel_column(r.x, cam);
        const int y = pixel_row(r.y, cam);
        if (x < 0 || y < 0) {
            ++local.out_of_roi;
            continue;
        }
        if (!detect(rng)) {
            continue;
        }
        ++local.detected;
        frame.at(x, y) += amplify(rng);
        if (cam.smear_prob > 0.0 && smear(rng)) {
            ++local.smeared;
            if (y > 0) {
                frame.at(x, y - 1) += amplify(rng);
            }
        }
    }

    auto& e = frame.electrons;
    bernoulli_scan(e.size(), cam.cic_prob, rng, [&](std::size_t i) {
        ++local.cic_events;
        e[i] += amplify(rng);
    });

    boost::random::normal_distribution<double> readout(cam.readout_mean, cam.readout_sigma);
    for (auto& v : e) {
        v += readout(rng);
    }
    boost::random::exponential_distribution<double> tail(1.0 / cam.tail_scale);
    bernoulli_scan(e.size(), cam.tail_prob, rng, [&](std::size_t i) {
        ++local.tail_events;
        e[i] += tail(rng);
    });

    for (auto& v : e) {
        if (v > cam.full_well) {
            v = cam.full_well;
            ++local.saturated;
        }
        v = quantise(v);
    }
    if (stats) {
        *stats = local;
    }
    return frame;
}

RawFrameSource source_of(std::span<const RawFrame> frames) {
    return [frames](const std::function<void(const RawFrame&)>& visit) {
        for (const auto& f : frames) visit(f);
    };
}

// ---------------------------------------------------------------------------

ResidualHistogram::ResidualHistogram()
    : counts_(static_cast<std::size_t>(2.0 * half_range / bin_width) + 2, 0) {}

void ResidualHistogram::add(double residual) {
    // Slot 0 is the underflow bin, the last slot the overflow bin.
    const double pos = (residual + half_range) / bin_width;
    std::size_t slot;
    if (pos < 0.0) {
        slot = 0;
    } else if (pos >= static_cast<double>(counts_.size() - 2)) {
        slot = counts_.size() - 1;
    } else {
        slot = 1 + static_cast<std::size_t>(pos);
    }
    ++counts_[slot];
    ++total_;
}

void ResidualHistogram::merge(const ResidualHistogram& other) {
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
    total_ += other.total_;
}

double ResidualHistogram::quantile(double fraction) const {
    require(total_ > 0, ErrorKind::InsufficientData, "empty residual histogram");
    const double target = std::clamp(fraction, 0.0, 1.0) * static_cast<double>(total_);
    double cumulative = 0.0;
    for (std::size_t slot = 0; slot < counts_.size(); ++slot) {
        const double c = static_cast<double>(counts_[slot]);
        if (c > 0.0 && cumulative + c >= target) {
            if (slot == 0) return -half_range;
            if (slot == counts_.size() - 1) return half_range;
            return -half_range + (static_cast<double>(slot) - 0.5) * bin_width;
        }
        cumulative += c;
    }
    return half_range;
}

double ResidualHistogram::fraction_above(double t) const {
    if (total_ == 0) return 0.0;
    const double pos = (t + half_range) / bin_width;
    const auto first = static_cast<std::size_t>(
        std::clamp(std::ceil(pos), 0.0, static_cast<double>(counts_.size() - 2)));
    std::uint64_t above = 0;
    for (std::size_t slot = first + 1; slot < counts_.size(); ++slot) above += counts_[slot];
    return static_cast<double>(above) / static_cast<double>(total_);
}

double ResidualHistogram::smallest_threshold_for(double target) const {
    if (total_ == 0) return std::numeric_limits<double>::quiet_NaN();
    const auto budget = static_cast<std::uint64_t>(std::floor(target * static_cast<double>(total_)));
    // Walk edges from the top: edge j sits between slot j and slot j + 1.
    std::uint64_t above = counts_.back();
    if (above > budget) return std::numeric_limits<double>::quiet_NaN();
    const std::size_t regular = counts_.size() - 2;
    std::size_t edge = regular;
    while (edge > 0 && above + counts_[edge] <= budget) {
        above += counts_[edge];
        --edge;
    }
    return -half_range + static_cast<double>(edge) * bin_width;
}

// ---------------------------------------------------------------------------

Calibration calibrate(const RawFrameSource& dark_stack) {
    Calibration cal;
    std::vector<double> sum;
    dark_stack([&](const RawFrame& f) {
        if (cal.frames == 0) {
            cal.width = f.width;
            cal.height = f.height;
            sum.assign(f.electrons.size(), 0.0);
        }
        require(f.width == cal.width && f.height == cal.height, ErrorKind::DimensionMismatch,
                "dark frames have mixed dimensions");
        for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += f.electrons[i];
        ++cal.frames;
    });
    require(cal.frames >= 2, ErrorKind::InsufficientData,
            "calibration needs at least 2 dark frames, got " + std::to_string(cal.frames));

    cal.pixel_mean.resize(sum.size());
    const double n = static_cast<double>(cal.frames);
    double mean_of_means = 0.0;
    for (std::size_t i = 0; i < sum.size(); ++i) {
        cal.pixel_mean[i] = sum[i] / n;
        mean_of_means += cal.pixel_mean[i];
    }
    mean_of_means /= static_cast<double>(sum.size());

    std::size_t second_pass = 0;
    dark_stack([&](const RawFrame& f) {
        for (std::size_t i = 0; i < f.electrons.size(); ++i) {
            cal.residuals.add(f.electrons[i] - cal.pixel_mean[i]);
        }
        ++second_pass;
    });
    require(second_pass == cal.frames, ErrorKind::Internal,
            "dark frame source is not re-iterable");

    // Bin-centre quantiles: a constant stack lands in one bin and gets sigma 0.
    const double median = cal.residuals.quantile(0.5);
    const double lower_quartile = cal.residuals.quantile(0.25);
    constexpr double kQuartileZ = 0.6744897501960817;
    cal.sigma_noise = std::max(0.0, median - lower_quartile) / kQuartileZ;
    cal.readout_center = mean_of_means + median;
    return cal;
}

Calibration calibrate(std::span<const RawFrame> dark_stack) {
    require(!dark_stack.empty(), ErrorKind::InsufficientData, "empty dark stack");
    return calibrate(source_of(dark_stack));
}

BinaryFrame threshold(const RawFrame& frame, const Calibration& cal, double k) {
    require(frame.width == cal.width && frame.height == cal.height, ErrorKind::DimensionMismatch,
            "frame " + std::to_string(frame.width) + "x" + std::to_string(frame.height) +
                " does not match calibration " + std::to_string(cal.width) + "x" +
                std::to_string(cal.height));
    BinaryFrame out(frame.width, frame.height);
    const double t = k * cal.sigma_noise;
    for (std::size_t i = 0; i < frame.electrons.size(); ++i) {
        out.bits[i] = (frame.electrons[i] - cal.pixel_mean[i]) > t ? 1 : 0;
    }
    return out;
}

double calibrate_flux_equivalence(const Calibration& cal, double target_occupancy) {
    require(target_occupancy >= 0.0 && target_occupancy <= 1.0, ErrorKind::InvalidParameter,
            "target occupancy must lie in [0, 1]");
    require(cal.sigma_noise > 0.0, ErrorKind::InsufficientData,
            "noise width is zero; occupancy cannot be tuned with k");
    const double best = static_cast<double>(1) / static_cast<double>(cal.residuals.total());
    const double t = cal.residuals.smallest_threshold_for(target_occupancy);
    // With continuous noise no finite k reaches zero occupancy; a target below
    // one pixel-frame of the dark stack cannot be resolved either.
    if (std::isnan(t) || target_occupancy < best) {
        fail(ErrorKind::InvalidParameter,
             "target occupancy " + std::to_string(target_occupancy) +
                 " is unreachable; the dark stack resolves occupancies down to " +
                 std::to_string(best) + ", occupancy above the histogram range is " +
                 std::to_string(cal.residuals.fraction_above(ResidualHistogram::half_range)));
    }
    return std::max(0.0, t / cal.sigma_noise);
}

double calibrate_flux_equivalence(std::span<const RawFrame> dark_stack, double target_occupancy) {
    return calibrate_flux_equivalence(calibrate(dark_stack), target_occupancy);
}

double dark_occupancy(const Calibration& cal, double k) {
    return cal.residuals.fraction_above(k * cal.sigma_noise);
}

}  // namespace eprcam::emccd
