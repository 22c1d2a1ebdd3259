#include "eprcam/correlate.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>
#include <string>

#include <fftw3.h>

#include "eprcam/error.hpp"

namespace eprcam::correlate {

std::string_view to_string(CorrelationMode mode) noexcept {
    return mode == CorrelationMode::Difference ? "difference" : "sum";
}

std::string_view to_string(Axis axis) noexcept { return axis == Axis::X ? "x" : "y"; }

int padded_fft_size(int n) noexcept {
    const int target = std::max(n, 1);
    int best = 0;
    for (int odd : {1, 3, 5, 7}) {
        int m = odd;
        while (m < target) m *= 2;
        if (best == 0 || m < best) best = m;
    }
    return best;
}

// ---------------------------------------------------------------------------
// CorrelationMap

CorrelationMap::CorrelationMap(CorrelationMode mode, int frame_width, int frame_height)
    : mode_(mode), frame_width_(frame_width), frame_height_(frame_height) {
    require(frame_width > 0 && frame_height > 0, ErrorKind::InvalidParameter,
            "correlation map needs positive frame dimensions");
    counts_.assign(static_cast<std::size_t>(grid_width()) * grid_height(), 0);
}

bool CorrelationMap::contains(int u, int v) const noexcept {
    const int ix = u + origin_x();
    const int iy = v + origin_y();
    return ix >= 0 && ix < grid_width() && iy >= 0 && iy < grid_height();
}

std::int64_t CorrelationMap::count(int u, int v) const {
    require(contains(u, v), ErrorKind::InvalidParameter, "coordinate outside correlation map");
    return counts_[static_cast<std::size_t>(v + origin_y()) * grid_width() + (u + origin_x())];
}

std::int64_t& CorrelationMap::count_ref(int u, int v) {
    require(contains(u, v), ErrorKind::InvalidParameter, "coordinate outside correlation map");
    return counts_[static_cast<std::size_t>(v + origin_y()) * grid_width() + (u + origin_x())];
}

std::int64_t CorrelationMap::total() const noexcept {
    return std::accumulate(counts_.begin(), counts_.end(), std::int64_t{0});
}

CorrelationMap& CorrelationMap::operator+=(const CorrelationMap& other) {
    require(mode_ == other.mode_ && frame_width_ == other.frame_width_ &&
                frame_height_ == other.frame_height_,
            ErrorKind::DimensionMismatch, "cannot merge correlation maps of different shape");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
    if (singles.empty()) {
        singles = other.singles;
    } else if (!other.singles.empty()) {
        for (std::size_t i = 0; i < singles.size(); ++i) singles[i] += other.singles[i];
    }
    frames_accumulated += other.frames_accumulated;
    return *this;
}

// ---------------------------------------------------------------------------
// Spectral machinery

namespace {

struct FftwFree {
    void operator()(void* p) const noexcept { fftw_free(p); }
};

using RealBuffer = std::unique_ptr<double[], FftwFree>;
using ComplexBuffer = std::unique_ptr<fftw_complex[], FftwFree>;

// The FFTW planner keeps global state.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

class Fft2d {
public:
    Fft2d(int px, int py, bool measure)
        : px_(px), py_(py), pc_(px / 2 + 1),
          real_(fftw_alloc_real(static_cast<std::size_t>(px) * py)),
          spectrum_(fftw_alloc_complex(complex_size())) {
        std::lock_guard lock(planner_mutex());
        const unsigned flags = measure ? FFTW_MEASURE : FFTW_ESTIMATE;
        forward_ = fftw_plan_dft_r2c_2d(py_, px_, real_.get(), spectrum_.get(), flags);
        inverse_ = fftw_plan_dft_c2r_2d(py_, px_, spectrum_.get(), real_.get(), flags);
        require(forward_ != nullptr && inverse_ != nullptr, ErrorKind::Internal,
                "FFTW planning failed");
        std::fill_n(real_.get(), static_cast<std::size_t>(px_) * py_, 0.0);
    }
    ~Fft2d() {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(forward_);
        fftw_destroy_plan(inverse_);
    }
    Fft2d(const Fft2d&) = delete;
    Fft2d& operator=(const Fft2d&) = delete;

    int px() const noexcept { return px_; }
    int py() const noexcept { return py_; }
    std::size_t complex_size() const noexcept { return static_cast<std::size_t>(pc_) * py_; }

    ComplexBuffer make_spectrum() const {
        ComplexBuffer b(fftw_alloc_complex(complex_size()));
        std::fill_n(&b[0][0], 2 * complex_size(), 0.0);
        return b;
    }

    /// Spectrum of the zero-padded indicator image of `ones`. The r2c
    /// transform preserves its input, so only the previous pixels are cleared.
    void transform(std::span<const Pixel> ones, fftw_complex* out) {
        double* in = real_.get();
        if (input_dirty_) {
            std::fill_n(in, static_cast<std::size_t>(px_) * py_, 0.0);
            input_dirty_ = false;
        } else {
            for (std::size_t idx : staged_) in[idx] = 0.0;
        }
        staged_.clear();
        for (const auto& p : ones) {
            const std::size_t idx = static_cast<std::size_t>(p.y) * px_ + p.x;
            in[idx] = 1.0;
            staged_.push_back(idx);
        }
        fftw_execute_dft_r2c(forward_, in, out);
    }

    /// Inverse of `spectrum` (unnormalised by FFTW, normalised here); the
    /// returned view aliases an internal buffer.
    std::span<const double> inverse(const fftw_complex* spectrum) {
        input_dirty_ = true;
        std::copy_n(&spectrum[0][0], 2 * complex_size(), &spectrum_[0][0]);
        fftw_execute_dft_c2r(inverse_, spectrum_.get(), real_.get());
        const double norm = 1.0 / (static_cast<double>(px_) * py_);
        const std::size_t n = static_cast<std::size_t>(px_) * py_;
        for (std::size_t i = 0; i < n; ++i) real_[i] *= norm;
        return {real_.get(), n};
    }

private:
    int px_;
    int py_;
    int pc_;
    RealBuffer real_;
    ComplexBuffer spectrum_;
    fftw_plan forward_ = nullptr;
    fftw_plan inverse_ = nullptr;
    std::vector<std::size_t> staged_;
    bool input_dirty_ = false;
};

}  // namespace

struct CorrelationEngine::Impl {
    CorrelationMode mode;
    int width;
    int height;
    EngineOptions options;
    int grid_w;
    int center_key;

    CorrelationMap sparse_signal;
    CorrelationMap sparse_reference;
    std::size_t frames = 0;
    std::size_t reference_pairs = 0;
    EngineStats stats;

    std::unique_ptr<Fft2d> fft;
    ComplexBuffer acc_signal;
    ComplexBuffer acc_reference;
    ComplexBuffer spec_current;
    ComplexBuffer spec_previous;
    bool previous_has_spectrum = false;

    std::vector<Pixel> ones_previous;
    std::vector<int> keys_previous;
    bool has_previous = false;

    Impl(CorrelationMode m, int w, int h, EngineOptions o)
        : mode(m), width(w), height(h), options(o), grid_w(2 * w - 1),
          center_key((w - 1) + (h - 1) * (2 * w - 1)),
          sparse_signal(m, w, h), sparse_reference(m, w, h) {
        sparse_signal.singles.assign(static_cast<std::size_t>(w) * h, 0);
    }

    Fft2d& spectral() {
        if (!fft) {
            fft = std::make_unique<Fft2d>(padded_fft_size(2 * width - 1),
                                          padded_fft_size(2 * height - 1), options.measure_plans);
            acc_signal = fft->make_spectrum();
            acc_reference = fft->make_spectrum();
            spec_current = fft->make_spectrum();
            spec_previous = fft->make_spectrum();
        }
        return *fft;
    }

    void sparse_pairs(std::span<const int> a, std::span<const int> b, std::span<std::int64_t> grid) const {
        std::int64_t* g = grid.data();
        if (mode == CorrelationMode::Difference) {
            for (int ka : a) {
                std::int64_t* base = g + (ka + center_key);
                for (int kb : b) ++base[-kb];
            }
        } else {
            for (int ka : a) {
                std::int64_t* base = g + ka;
                for (int kb : b) ++base[kb];
            }
        }
    }

    void spectral_product(const fftw_complex* a, const fftw_complex* b, fftw_complex* acc) const {
        const std::size_t n = fft->complex_size();
        if (mode == CorrelationMode::Difference) {
            // a * conj(b)
            for (std::size_t i = 0; i < n; ++i) {
                acc[i][0] += a[i][0] * b[i][0] + a[i][1] * b[i][1];
                acc[i][1] += a[i][1] * b[i][0] - a[i][0] * b[i][1];
            }
        } else {
            for (std::size_t i = 0; i < n; ++i) {
                acc[i][0] += a[i][0] * b[i][0] - a[i][1] * b[i][1];
                acc[i][1] += a[i][1] * b[i][0] + a[i][0] * b[i][1];
            }
        }
    }

    void add(const BinaryFrame& frame) {
        require(frame.width == width && frame.height == height, ErrorKind::DimensionMismatch,
                "frame " + std::to_string(frame.width) + "x" + std::to_string(frame.height) +
                    " does not match stack dimensions " + std::to_string(width) + "x" +
                    std::to_string(height));
        std::vector<Pixel> ones = frame.ones();
        std::vector<int> keys;
        keys.reserve(ones.size());
        for (const auto& p : ones) {
            keys.push_back(p.x + p.y * grid_w);
            ++sparse_signal.singles[static_cast<std::size_t>(p.y) * width + p.x];
        }

        const std::size_t n = ones.size();
        const std::size_t limit = options.sparse_max_ones;
        auto dense = [&](std::size_t pairs) {
            return options.path == CorrelationPath::Spectral ||
                   (options.path == CorrelationPath::Auto && pairs > limit * limit);
        };

        bool current_has_spectrum = false;
        if (dense(n * n)) {
            Fft2d& f = spectral();
            f.transform(ones, spec_current.get());
            current_has_spectrum = true;
            spectral_product(spec_current.get(), spec_current.get(), acc_signal.get());
            ++stats.spectral_frames;
        } else {
            sparse_pairs(keys, keys, sparse_signal.counts());
            ++stats.sparse_frames;
        }

        if (options.with_reference && has_previous) {
            if (dense(ones_previous.size() * n)) {
                Fft2d& f = spectral();
                if (!previous_has_spectrum) {
                    f.transform(ones_previous, spec_previous.get());
                }
                if (!current_has_spectrum) {
                    f.transform(ones, spec_current.get());
                    current_has_spectrum = true;
                }
                spectral_product(spec_previous.get(), spec_current.get(), acc_reference.get());
                ++stats.spectral_pairs;
            } else {
                sparse_pairs(keys_previous, keys, sparse_reference.counts());
                ++stats.sparse_pairs;
            }
            ++reference_pairs;
        }

        ones_previous = std::move(ones);
        keys_previous = std::move(keys);
        if (current_has_spectrum) {
            std::swap(spec_current, spec_previous);
        }
        previous_has_spectrum = current_has_spectrum;
        has_previous = true;
        ++frames;
    }

    void add_spectral(const fftw_complex* acc, std::size_t contributions, CorrelationMap& map) const {
        if (contributions == 0 || !fft) return;
        const auto real = fft->inverse(acc);
        const int px = fft->px();
        const int py = fft->py();
        const bool diff = mode == CorrelationMode::Difference;
        auto counts = map.counts();
        const int gw = map.grid_width();
        const int gh = map.grid_height();
        for (int iy = 0; iy < gh; ++iy) {
            const int v = iy - map.origin_y();
            const int sy = diff ? (v + py) % py : v;
            for (int ix = 0; ix < gw; ++ix) {
                const int u = ix - map.origin_x();
                const int sx = diff ? (u + px) % px : u;
                const double value = real[static_cast<std::size_t>(sy) * px + sx];
                const double rounded = std::round(value);
                if (std::abs(value - rounded) > 0.25) {
                    fail(ErrorKind::Internal,
                         "spectral correlation residual " + std::to_string(value - rounded) +
                             " at (" + std::to_string(u) + ", " + std::to_string(v) + ")");
                }
                counts[static_cast<std::size_t>(iy) * gw + ix] += static_cast<std::int64_t>(rounded);
            }
        }
    }
};

CorrelationEngine::CorrelationEngine(CorrelationMode mode, int width, int height,
                                     EngineOptions options)
    : impl_(std::make_unique<Impl>(mode, width, height, options)) {}

CorrelationEngine::~CorrelationEngine() = default;
CorrelationEngine::CorrelationEngine(CorrelationEngine&&) noexcept = default;
CorrelationEngine& CorrelationEngine::operator=(CorrelationEngine&&) noexcept = default;

void CorrelationEngine::add(const BinaryFrame& frame) { impl_->add(frame); }

CorrelationMap CorrelationEngine::signal() const {
    CorrelationMap map = impl_->sparse_signal;
    impl_->add_spectral(impl_->acc_signal.get(), impl_->stats.spectral_frames, map);
    map.frames_accumulated = impl_->frames;
    return map;
}

CorrelationMap CorrelationEngine::reference() const {
    CorrelationMap map = impl_->sparse_reference;
    impl_->add_spectral(impl_->acc_reference.get(), impl_->stats.spectral_pairs, map);
    map.frames_accumulated = impl_->reference_pairs;
    return map;
}

std::size_t CorrelationEngine::frames() const noexcept { return impl_->frames; }
const EngineStats& CorrelationEngine::stats() const noexcept { return impl_->stats; }

namespace {

CorrelationEngine run_engine(std::span<const BinaryFrame> stack, CorrelationMode mode,
                             CorrelationPath path, bool with_reference) {
    require(!stack.empty(), ErrorKind::InsufficientData, "empty frame stack");
    EngineOptions options;
    options.path = path;
    options.measure_plans = false;
    options.with_reference = with_reference;
    CorrelationEngine engine(mode, stack.front().width, stack.front().height, options);
    for (const auto& f : stack) engine.add(f);
    return engine;
}

}  // namespace

CorrelationMap accumulate(std::span<const BinaryFrame> stack, CorrelationMode mode) {
    return run_engine(stack, mode, CorrelationPath::Sparse, false).signal();
}

CorrelationMap reference(std::span<const BinaryFrame> stack, CorrelationMode mode) {
    require(stack.size() >= 2, ErrorKind::InsufficientData,
            "reference correlation needs at least 2 frames");
    return run_engine(stack, mode, CorrelationPath::Sparse, true).reference();
}

CorrelationMap fft_accumulate(std::span<const BinaryFrame> stack, CorrelationMode mode) {
    return run_engine(stack, mode, CorrelationPath::Spectral, false).signal();
}

CorrelationMap fft_reference(std::span<const BinaryFrame> stack, CorrelationMode mode) {
    require(stack.size() >= 2, ErrorKind::InsufficientData,
            "reference correlation needs at least 2 frames");
    return run_engine(stack, mode, CorrelationPath::Spectral, true).reference();
}

// ---------------------------------------------------------------------------
// Subtraction

SubtractedMap::SubtractedMap(CorrelationMode mode, int frame_width, int frame_height)
    : mode_(mode), frame_width_(frame_width), frame_height_(frame_height),
      values_(static_cast<std::size_t>(2 * frame_width - 1) * (2 * frame_height - 1), 0.0),
      masked_(values_.size(), 0) {}

bool SubtractedMap::contains(int u, int v) const noexcept {
    const int ix = u + origin_x();
    const int iy = v + origin_y();
    return ix >= 0 && ix < grid_width() && iy >= 0 && iy < grid_height();
}

std::size_t SubtractedMap::index(int u, int v) const {
    require(contains(u, v), ErrorKind::InvalidParameter, "coordinate outside subtracted map");
    return static_cast<std::size_t>(v + origin_y()) * grid_width() + (u + origin_x());
}

double SubtractedMap::value(int u, int v) const { return values_[index(u, v)]; }
double& SubtractedMap::value_ref(int u, int v) { return values_[index(u, v)]; }
bool SubtractedMap::is_masked(int u, int v) const { return masked_[index(u, v)] != 0; }

void SubtractedMap::mask(int u, int v) {
    if (!contains(u, v)) return;
    const std::size_t i = index(u, v);
    values_[i] = 0.0;
    if (!masked_[i]) {
        masked_[i] = 1;
        masked_bins_.push_back({u, v});
    }
}

SubtractedMap subtract(const CorrelationMap& signal, const CorrelationMap& ref,
                       const MaskSet& masks) {
    require(signal.mode() == ref.mode(), ErrorKind::InvalidParameter,
            "cannot subtract a " + std::string(to_string(ref.mode())) + " reference from a " +
                std::string(to_string(signal.mode())) + " map");
    require(signal.frame_width() == ref.frame_width() && signal.frame_height() == ref.frame_height(),
            ErrorKind::DimensionMismatch, "signal and reference maps differ in size");
    require(signal.frames_accumulated > 0 && ref.frames_accumulated > 0,
            ErrorKind::InsufficientData, "signal and reference must both hold frames");

    SubtractedMap out(signal.mode(), signal.frame_width(), signal.frame_height());
    out.frames = signal.frames_accumulated;
    out.reference_scale = static_cast<double>(signal.frames_accumulated) /
                          static_cast<double>(ref.frames_accumulated);
    const auto sig = signal.counts();
    const auto bg = ref.counts();
    for (int iy = 0; iy < out.grid_height(); ++iy) {
        for (int ix = 0; ix < out.grid_width(); ++ix) {
            const std::size_t i = static_cast<std::size_t>(iy) * out.grid_width() + ix;
            out.value_ref(ix - out.origin_x(), iy - out.origin_y()) =
                static_cast<double>(sig[i]) - out.reference_scale * static_cast<double>(bg[i]);
        }
    }

    if (masks.self_pairs && !signal.singles.empty()) {
        const int w = signal.frame_width();
        for (int y = 0; y < signal.frame_height(); ++y) {
            for (int x = 0; x < w; ++x) {
                const auto s = static_cast<double>(signal.singles[static_cast<std::size_t>(y) * w + x]);
                if (s == 0.0) continue;
                if (signal.mode() == CorrelationMode::Difference) {
                    out.value_ref(0, 0) -= s;
                } else {
                    out.value_ref(2 * x, 2 * y) -= s;
                }
            }
        }
    }

    if (signal.mode() == CorrelationMode::Difference) {
        if (masks.central) out.mask(0, 0);
        if (masks.smear_rows) {
            for (int u = out.u_min(); u <= out.u_max(); ++u) {
                out.mask(u, 1);
                out.mask(u, -1);
            }
        }
    }
    return out;
}

PeakStats peak_snr(const SubtractedMap& sub, const CorrelationMap& signal,
                   const CorrelationMap& ref, int radius) {
    require(radius >= 0, ErrorKind::InvalidParameter, "peak radius must be >= 0");
    require(sub.mode() == signal.mode() && sub.mode() == ref.mode(), ErrorKind::InvalidParameter,
            "peak statistics need maps of one mode");
    PeakStats stats;
    stats.radius = radius;
    double variance = 0.0;
    const double s2 = sub.reference_scale * sub.reference_scale;
    for (int v = sub.peak_v() - radius; v <= sub.peak_v() + radius; ++v) {
        for (int u = sub.peak_u() - radius; u <= sub.peak_u() + radius; ++u) {
            if (!sub.contains(u, v) || sub.is_masked(u, v)) continue;
            stats.signal += sub.value(u, v);
            variance += static_cast<double>(signal.count(u, v)) + s2 * static_cast<double>(ref.count(u, v));
            ++stats.bins;
        }
    }
    stats.noise = std::sqrt(variance);
    stats.snr = stats.noise > 0.0 ? stats.signal / stats.noise : 0.0;
    return stats;
}

Profile row_profile(const SubtractedMap& sub, int v) {
    require(v >= sub.v_min() && v <= sub.v_max(), ErrorKind::InvalidParameter,
            "row outside subtracted map");
    Profile p;
    for (int u = sub.u_min(); u <= sub.u_max(); ++u) {
        p.coordinate.push_back(u);
        p.value.push_back(sub.value(u, v));
        p.masked.push_back(sub.is_masked(u, v) ? 1 : 0);
    }
    return p;
}

Profile column_profile(const SubtractedMap& sub, int u) {
    require(u >= sub.u_min() && u <= sub.u_max(), ErrorKind::InvalidParameter,
            "column outside subtracted map");
    Profile p;
    for (int v = sub.v_min(); v <= sub.v_max(); ++v) {
        p.coordinate.push_back(v);
        p.value.push_back(sub.value(u, v));
        p.masked.push_back(sub.is_masked(u, v) ? 1 : 0);
    }
    return p;
}

// ---------------------------------------------------------------------------
// Joint distributions

JointAccumulator::JointAccumulator(Axis axis, int width, int height)
    : axis_(axis), width_(width), height_(height), size_(axis == Axis::X ? width : height) {
    require(width > 0 && height > 0, ErrorKind::InvalidParameter,
            "joint distribution needs positive frame dimensions");
    const auto s = static_cast<std::size_t>(size_);
    outer_.assign(s * s, 0);
    cross_.assign(s * s, 0);
    singles_.assign(s, 0);
    previous_.assign(s, 0);
}

void JointAccumulator::add(const BinaryFrame& frame) {
    require(frame.width == width_ && frame.height == height_, ErrorKind::DimensionMismatch,
            "frame does not match joint-distribution dimensions");
    std::vector<std::int32_t> marginal(static_cast<std::size_t>(size_), 0);
    for (int y = 0; y < height_; ++y) {
        const std::uint8_t* row = frame.bits.data() + static_cast<std::size_t>(y) * width_;
        if (axis_ == Axis::X) {
            for (int x = 0; x < width_; ++x) marginal[x] += row[x];
        } else {
            std::int32_t n = 0;
            for (int x = 0; x < width_; ++x) n += row[x];
            marginal[y] = n;
        }
    }
    std::vector<int> nz;
    for (int c = 0; c < size_; ++c) {
        if (marginal[c]) nz.push_back(c);
    }
    const auto s = static_cast<std::size_t>(size_);
    for (int i : nz) {
        singles_[i] += marginal[i];
        std::int64_t* row = outer_.data() + static_cast<std::size_t>(i) * s;
        for (int j : nz) row[j] += static_cast<std::int64_t>(marginal[i]) * marginal[j];
    }
    if (has_previous_) {
        for (int i = 0; i < size_; ++i) {
            if (!previous_[i]) continue;
            std::int64_t* row = cross_.data() + static_cast<std::size_t>(i) * s;
            for (int j : nz) row[j] += static_cast<std::int64_t>(previous_[i]) * marginal[j];
        }
        ++reference_pairs_;
    }
    previous_ = std::move(marginal);
    has_previous_ = true;
    ++frames_;
}

JointAccumulator& JointAccumulator::operator+=(const JointAccumulator& other) {
    if (other.frames_ == 0) return *this;
    if (frames_ == 0 && size_ == 0) {
        *this = other;
        return *this;
    }
    require(axis_ == other.axis_ && width_ == other.width_ && height_ == other.height_,
            ErrorKind::DimensionMismatch, "cannot merge joint accumulators of different shape");
    for (std::size_t i = 0; i < outer_.size(); ++i) {
        outer_[i] += other.outer_[i];
        cross_[i] += other.cross_[i];
    }
    for (std::size_t i = 0; i < singles_.size(); ++i) singles_[i] += other.singles_[i];
    frames_ += other.frames_;
    reference_pairs_ += other.reference_pairs_;
    previous_ = other.previous_;
    has_previous_ = other.has_previous_;
    return *this;
}

JointDistribution JointAccumulator::result(model::Plane plane, bool with_reference) const {
    require(frames_ > 0, ErrorKind::InsufficientData, "joint distribution has no frames");
    JointDistribution j;
    j.axis = axis_;
    j.plane = plane;
    j.size = size_;
    j.frames = frames_;
    j.background_subtracted = with_reference;
    j.values.assign(outer_.begin(), outer_.end());
    j.singles.assign(singles_.begin(), singles_.end());
    if (with_reference) {
        require(reference_pairs_ > 0, ErrorKind::InsufficientData,
                "background subtraction needs at least 2 consecutive frames");
        const double scale = static_cast<double>(frames_) / static_cast<double>(reference_pairs_);
        const auto s = static_cast<std::size_t>(size_);
        for (int i = 0; i < size_; ++i) {
            j.at(i, i) -= static_cast<double>(singles_[i]);
            for (int k = 0; k < size_; ++k) {
                const double sym = 0.5 * static_cast<double>(cross_[i * s + k] + cross_[k * s + i]);
                j.at(i, k) -= scale * sym;
            }
        }
    }
    return j;
}

JointDistribution joint_1d(std::span<const BinaryFrame> stack, Axis axis, model::Plane plane,
                           bool with_reference) {
    require(!stack.empty(), ErrorKind::InsufficientData, "empty frame stack");
    JointAccumulator acc(axis, stack.front().width, stack.front().height);
    for (const auto& f : stack) acc.add(f);
    return acc.result(plane, with_reference);
}

}  // namespace eprcam::correlate
