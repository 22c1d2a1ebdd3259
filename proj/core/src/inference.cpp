#include "eprcam/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <Eigen/Dense>

#include "eprcam/error.hpp"
#include "eprcam/rng.hpp"

namespace eprcam::inference {

namespace {

bool masked_at(std::span<const std::uint8_t> mask, std::size_t i) {
    return !mask.empty() && mask[i] != 0;
}

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    double m = *mid;
    if (v.size() % 2 == 0) {
        m = 0.5 * (m + *std::max_element(v.begin(), mid));
    }
    return m;
}

}  // namespace

double GaussianFit::operator()(double u) const noexcept {
    const double z = (u - mean) / sigma;
    return amplitude * std::exp(-0.5 * z * z) + baseline;
}

Moments histogram_moments(std::span<const double> coordinate, std::span<const double> counts,
                          std::span<const std::uint8_t> mask, double trim_sigmas) {
    require(coordinate.size() == counts.size(), ErrorKind::DimensionMismatch,
            "coordinate and count arrays differ in length");
    require(mask.empty() || mask.size() == counts.size(), ErrorKind::DimensionMismatch,
            "mask length does not match histogram");

    auto compute = [&](double lo, double hi) {
        Moments m;
        double s1 = 0.0;
        for (std::size_t i = 0; i < counts.size(); ++i) {
            if (masked_at(mask, i) || coordinate[i] < lo || coordinate[i] > hi) continue;
            const double w = std::max(counts[i], 0.0);
            m.weight += w;
            s1 += w * coordinate[i];
        }
        if (m.weight <= 0.0) return m;
        m.mean = s1 / m.weight;
        double s2 = 0.0;
        for (std::size_t i = 0; i < counts.size(); ++i) {
            if (masked_at(mask, i) || coordinate[i] < lo || coordinate[i] > hi) continue;
            const double d = coordinate[i] - m.mean;
            s2 += std::max(counts[i], 0.0) * d * d;
        }
        m.variance = s2 / m.weight;
        return m;
    };

    constexpr double inf = std::numeric_limits<double>::infinity();
    Moments m = compute(-inf, inf);
    if (trim_sigmas <= 0.0) return m;
    for (int iter = 0; iter < 20 && m.weight > 0.0 && m.variance > 0.0; ++iter) {
        const double half = trim_sigmas * std::sqrt(m.variance);
        Moments next = compute(m.mean - half, m.mean + half);
        if (next.weight <= 0.0 || next.variance <= 0.0) break;
        const bool stable = std::abs(next.mean - m.mean) < 1e-9 * (1.0 + std::abs(m.mean)) &&
                            std::abs(next.variance - m.variance) < 1e-9 * m.variance;
        m = next;
        if (stable) break;
    }
    return m;
}

GaussianFit fit_gaussian(std::span<const double> coordinate, std::span<const double> counts,
                         const FitOptions& options) {
    require(coordinate.size() == counts.size(), ErrorKind::DimensionMismatch,
            "coordinate and count arrays differ in length");
    require(options.mask.empty() || options.mask.size() == counts.size(),
            ErrorKind::DimensionMismatch, "mask length does not match histogram");
    require(options.weights.empty() || options.weights.size() == counts.size(),
            ErrorKind::DimensionMismatch, "weight length does not match histogram");

    std::vector<double> u;
    std::vector<double> y;
    std::vector<double> w;
    std::size_t nonzero = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (masked_at(options.mask, i)) continue;
        u.push_back(coordinate[i]);
        y.push_back(counts[i]);
        w.push_back(options.weights.empty() ? 1.0 : options.weights[i]);
        if (counts[i] != 0.0) ++nonzero;
    }
    require(nonzero >= 5, ErrorKind::InsufficientData,
            "Gaussian fit needs at least 5 nonzero bins, got " + std::to_string(nonzero));
    const auto [ymin, ymax] = std::minmax_element(y.begin(), y.end());
    require(*ymax > *ymin, ErrorKind::FitFailure, "Gaussian fit on constant data is degenerate");

    const double u_lo = *std::min_element(u.begin(), u.end());
    const double u_hi = *std::max_element(u.begin(), u.end());
    const double span = u_hi - u_lo;
    double spacing = span;
    for (std::size_t i = 1; i < u.size(); ++i) {
        if (u[i] > u[i - 1]) spacing = std::min(spacing, u[i] - u[i - 1]);
    }

    // Initial values from trimmed moments above a median baseline.
    const double b0 = options.fit_baseline ? median(y) : 0.0;
    std::vector<double> lifted(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) lifted[i] = y[i] - b0;
    Moments m = histogram_moments(u, lifted, {}, 3.0);
    if (m.weight <= 0.0) {
        fail(ErrorKind::FitFailure, "Gaussian fit: no positive excess for moment initialisation");
    }
    const int np = options.fit_baseline ? 4 : 3;
    Eigen::Vector4d theta(*ymax - b0, m.mean, std::sqrt(std::max(m.variance, 0.25 * spacing * spacing)), b0);

    auto chi2_of = [&](const Eigen::Vector4d& t) {
        double c = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) {
            const double z = (u[i] - t[1]) / t[2];
            const double r = y[i] - (t[0] * std::exp(-0.5 * z * z) + t[3]);
            c += w[i] * r * r;
        }
        return c;
    };

    Eigen::Matrix4d h;
    Eigen::Vector4d g;
    auto linearise = [&](const Eigen::Vector4d& t) {
        h.setZero();
        g.setZero();
        for (std::size_t i = 0; i < u.size(); ++i) {
            const double d = u[i] - t[1];
            const double z = d / t[2];
            const double e = std::exp(-0.5 * z * z);
            const double r = y[i] - (t[0] * e + t[3]);
            Eigen::Vector4d jac(e, t[0] * e * d / (t[2] * t[2]), t[0] * e * d * d / (t[2] * t[2] * t[2]),
                                1.0);
            if (!options.fit_baseline) jac[3] = 0.0;
            h.noalias() += w[i] * jac * jac.transpose();
            g.noalias() += w[i] * r * jac;
        }
        if (!options.fit_baseline) h(3, 3) = 1.0;
    };

    double chi2 = chi2_of(theta);
    linearise(theta);
    const double g0 = g.norm();
    double lambda = 1e-3;
    int iter = 0;
    int stalled = 0;
    bool converged = !(g0 > 0.0);
    while (!converged) {
        if (iter >= options.max_iterations) {
            fail(ErrorKind::FitFailure,
                 "Gaussian fit did not converge in " + std::to_string(options.max_iterations) +
                     " iterations (A=" + std::to_string(theta[0]) + ", mu=" + std::to_string(theta[1]) +
                     ", sigma=" + std::to_string(theta[2]) + ", b=" + std::to_string(theta[3]) +
                     ", |grad|/|grad0|=" + std::to_string(g.norm() / g0) + ")");
        }
        ++iter;
        Eigen::Matrix4d a = h;
        for (int k = 0; k < 4; ++k) a(k, k) += lambda * std::max(h(k, k), 1e-300);
        const Eigen::Vector4d step = a.ldlt().solve(g);
        Eigen::Vector4d trial = theta + step;
        if (!options.fit_baseline) trial[3] = 0.0;
        const double trial_chi2 = (trial[2] > 0.0 && trial.allFinite()) ? chi2_of(trial)
                                                                          : std::numeric_limits<double>::infinity();
        if (trial_chi2 <= chi2) {
            const double previous = chi2;
            theta = trial;
            chi2 = trial_chi2;
            linearise(theta);
            lambda = std::max(lambda / 3.0, 1e-12);
            if (g.norm() <= options.gradient_tolerance * g0) {
                converged = true;
            } else if (previous - chi2 <= 1e-13 * previous) {
                // Stalled at the floating-point floor or in a flat valley.
                if (++stalled >= 5) converged = true;
            } else {
                stalled = 0;
            }
        } else {
            lambda *= 4.0;
            if (lambda > 1e20) {
                // No descent direction left at working precision.
                converged = true;
            }
        }
    }

    GaussianFit fit;
    fit.amplitude = theta[0];
    fit.mean = theta[1];
    fit.sigma = std::abs(theta[2]);
    fit.baseline = options.fit_baseline ? theta[3] : 0.0;
    fit.iterations = iter;
    fit.bins_used = u.size();
    fit.residual_norm = std::sqrt(chi2);

    const Eigen::MatrixXd hp = h.topLeftCorner(np, np);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(hp);
    if (lu.isInvertible()) {
        Eigen::MatrixXd cov = lu.inverse();
        if (options.weights.empty()) {
            const double dof = static_cast<double>(u.size()) - np;
            cov *= dof > 0.0 ? chi2 / dof : 0.0;
        }
        auto se = [&](int k) {
            const double v = cov(k, k);
            return v > 0.0 && std::isfinite(v) ? std::sqrt(v) : std::numeric_limits<double>::infinity();
        };
        fit.amplitude_error = se(0);
        fit.mean_error = se(1);
        fit.sigma_error = se(2);
        fit.baseline_error = options.fit_baseline ? se(3) : 0.0;
        // Exact data give a zero covariance scale.
        if (chi2 == 0.0) {
            fit.amplitude_error = fit.mean_error = fit.sigma_error = fit.baseline_error = 0.0;
        }
    } else {
        fit.amplitude_error = fit.mean_error = fit.sigma_error = std::numeric_limits<double>::infinity();
        fit.baseline_error = options.fit_baseline ? fit.sigma_error : 0.0;
    }
    fit.well_constrained = std::isfinite(fit.sigma_error) && fit.sigma_error < span &&
                           fit.sigma < span && fit.amplitude > 0.0;
    return fit;
}

// ---------------------------------------------------------------------------

namespace {

struct Ridge {
    bool found = false;
    double center = 0.0;
    double sigma = 0.0;
};

/// Location of the correlation ridge: c1 - c2 = center (image plane) or
/// c1 + c2 = center (far field).
Ridge find_ridge(const JointDistribution& joint, bool mask_diagonal, double min_significance) {
    const int n = joint.size;
    const int m = 2 * n - 1;
    const bool image = joint.plane == model::Plane::ImagePlane;
    std::vector<double> proj(m, 0.0);
    std::vector<double> coord(m);
    for (int i = 0; i < m; ++i) coord[i] = image ? i - (n - 1) : i;
    for (int c1 = 0; c1 < n; ++c1) {
        for (int c2 = 0; c2 < n; ++c2) proj[image ? c1 - c2 + n - 1 : c1 + c2] += joint.at(c1, c2);
    }
    FitOptions options;
    if (mask_diagonal && image) {
        options.mask.assign(m, 0);
        options.mask[n - 1] = 1;
    }
    Ridge r;
    try {
        const GaussianFit fit = fit_gaussian(coord, proj, options);
        if (fit.well_constrained && fit.significance() >= min_significance && fit.sigma < 0.25 * n) {
            r.found = true;
            r.center = fit.mean;
            r.sigma = fit.sigma;
        }
    } catch (const Error&) {
    }
    return r;
}

}  // namespace

InferredVariance min_inferred_variance(const JointDistribution& joint, Direction direction,
                                       double scale, const InferenceOptions& options) {
    require(joint.size > 0 && joint.values.size() == static_cast<std::size_t>(joint.size) * joint.size,
            ErrorKind::DimensionMismatch, "joint distribution is not square");
    require(scale > 0.0 && std::isfinite(scale), ErrorKind::InvalidParameter,
            "pixel-to-crystal scale must be positive");
    const int n = joint.size;
    auto value = [&](int spread, int cond) {
        return direction == Direction::FirstGivenSecond ? joint.at(spread, cond) : joint.at(cond, spread);
    };

    InferredVariance out;
    std::vector<double> weight(n, 0.0);
    for (int c = 0; c < n; ++c) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += value(i, c);
        if (s < 0.0) {
            ++out.clamped_bins;
            s = 0.0;
        }
        weight[c] = s;
    }
    const double peak = *std::max_element(weight.begin(), weight.end());
    require(peak > 0.0, ErrorKind::InsufficientData, "joint distribution has no positive weight");

    const Ridge ridge = find_ridge(joint, options.mask_diagonal, options.min_significance);
    const bool image = joint.plane == model::Plane::ImagePlane;
    if (ridge.found) {
        out.window = std::max(options.min_window, static_cast<int>(std::ceil(options.window_sigmas * ridge.sigma)));
    }
    // Expected spread coordinate on the ridge for conditioning bin c.
    auto ridge_at = [&](int c) {
        if (image) return direction == Direction::FirstGivenSecond ? c + ridge.center : c - ridge.center;
        return ridge.center - c;
    };

    std::vector<double> coord;
    std::vector<double> slice;
    FitOptions fit_options;
    fit_options.fit_baseline = options.fit_baseline;

    double weighted = 0.0;
    double total_weight = 0.0;
    for (int c = 0; c < n; ++c) {
        if (weight[c] < options.weight_floor * peak || weight[c] <= 0.0) continue;
        int lo = 0;
        int hi = n - 1;
        if (out.window > 0) {
            const double center = ridge_at(c);
            lo = std::max(0, static_cast<int>(std::floor(center)) - out.window);
            hi = std::min(n - 1, static_cast<int>(std::ceil(center)) + out.window);
            if (hi - lo < 4) continue;
        }
        coord.clear();
        slice.clear();
        fit_options.mask.clear();
        for (int i = lo; i <= hi; ++i) {
            coord.push_back(i);
            slice.push_back(value(i, c));
            fit_options.mask.push_back(options.mask_diagonal && i == c ? 1 : 0);
        }

        double variance = -1.0;
        try {
            const GaussianFit fit = fit_gaussian(coord, slice, fit_options);
            if (fit.well_constrained && fit.significance() >= options.min_significance) {
                variance = fit.sigma * fit.sigma;
                ++out.fitted_slices;
            }
        } catch (const Error&) {
        }
        if (variance < 0.0) {
            const Moments m = histogram_moments(coord, slice, fit_options.mask, out.window > 0 ? 0.0 : 3.0);
            if (m.weight <= 0.0 || m.variance <= 0.0) continue;
            variance = m.variance;
            ++out.moment_fallbacks;
        }
        weighted += weight[c] * variance;
        total_weight += weight[c];
        ++out.slices_used;
    }
    require(out.slices_used >= 3, ErrorKind::InsufficientData,
            "min_inferred_variance needs at least 3 usable slices, got " +
                std::to_string(out.slices_used));
    out.detector_px2 = weighted / total_weight;
    out.value = out.detector_px2 * scale * scale;
    out.deconvolved = (out.detector_px2 - options.pixel_variance) * scale * scale;
    return out;
}

EprProduct epr_product(double position_variance, double momentum_variance) {
    require(position_variance >= 0.0 && momentum_variance >= 0.0 &&
                std::isfinite(position_variance) && std::isfinite(momentum_variance),
            ErrorKind::InvalidParameter, "variances must be finite and non-negative");
    EprProduct p;
    p.product = position_variance * momentum_variance;
    p.violation = p.product < 0.25;
    p.violation_factor = p.product > 0.0 ? 0.25 / p.product : std::numeric_limits<double>::infinity();
    return p;
}

EprProducts epr_products(const std::optional<PlaneVariances>& position,
                         const std::optional<PlaneVariances>& momentum) {
    std::string missing;
    if (!position) missing += " image-plane";
    if (!momentum) missing += " far-field";
    require(missing.empty(), ErrorKind::InsufficientData, "EPR product needs the" + missing + " analysis");
    return {epr_product(position->first_given_second, momentum->first_given_second),
            epr_product(position->second_given_first, momentum->second_given_first)};
}

// ---------------------------------------------------------------------------

AxisWidths projection_widths(const JointDistribution& joint, bool mask_diagonal) {
    const int n = joint.size;
    require(n >= 3, ErrorKind::InsufficientData, "joint distribution too small for projections");
    const int m = 2 * n - 1;
    const bool image = joint.plane == model::Plane::ImagePlane;
    std::vector<double> diff_coord(m);
    std::vector<double> sum_coord(m);
    for (int i = 0; i < m; ++i) {
        diff_coord[i] = i - (n - 1);
        sum_coord[i] = i;
    }

    // Narrow projection over the whole distribution.
    std::vector<double> narrow(m, 0.0);
    for (int c1 = 0; c1 < n; ++c1) {
        for (int c2 = 0; c2 < n; ++c2) narrow[image ? c1 - c2 + n - 1 : c1 + c2] += joint.at(c1, c2);
    }
    FitOptions narrow_opts;
    if (mask_diagonal && image) {
        narrow_opts.mask.assign(m, 0);
        narrow_opts.mask[n - 1] = 1;
    }
    const GaussianFit nf = fit_gaussian(image ? diff_coord : sum_coord, narrow, narrow_opts);

    // Wide projection restricted to a band around the ridge, which keeps
    // bins holding only background out of the sum.
    int band = m;
    if (nf.well_constrained && nf.sigma < 0.25 * n) {
        band = std::max(8, static_cast<int>(std::ceil(8.0 * nf.sigma)));
    }
    std::vector<double> wide(m, 0.0);
    for (int c1 = 0; c1 < n; ++c1) {
        for (int c2 = 0; c2 < n; ++c2) {
            const double along = image ? c1 - c2 : c1 + c2;
            if (std::abs(along - nf.mean) > band) continue;
            wide[image ? c1 + c2 : c1 - c2 + n - 1] += joint.at(c1, c2);
        }
    }
    FitOptions wide_opts;
    wide_opts.fit_baseline = false;
    if (mask_diagonal && !image) {
        wide_opts.mask.assign(m, 0);
        wide_opts.mask[n - 1] = 1;
    }
    const GaussianFit wf = fit_gaussian(image ? sum_coord : diff_coord, wide, wide_opts);

    AxisWidths w;
    w.difference = image ? nf : wf;
    w.sum = image ? wf : nf;
    w.narrow_px = nf.sigma;
    w.narrow_error = nf.sigma_error;
    w.wide_px = wf.sigma;
    w.wide_error = wf.sigma_error;
    w.marginal_sigma_px = 0.5 * std::hypot(w.narrow_px, w.wide_px);
    w.marginal_center_px = 0.5 * w.sum.mean + 0.5;
    w.coverage = coverage(w.marginal_sigma_px, w.marginal_center_px, n);
    return w;
}

double coverage(double sigma_px, double center_px, int roi_pixels) {
    require(sigma_px > 0.0 && roi_pixels > 0, ErrorKind::InvalidParameter,
            "coverage needs a positive width and ROI");
    const double s = sigma_px * std::sqrt(2.0);
    return 0.5 * (std::erf((roi_pixels - center_px) / s) - std::erf((0.0 - center_px) / s));
}

Dimensionality dimensionality(const DimensionalityInputs& in) {
    std::string missing;
    if (!in.image_x) missing += " image-x";
    if (!in.image_y && !in.substitute_image_y) missing += " image-y";
    if (!in.far_x) missing += " far-x";
    if (!in.far_y) missing += " far-y";
    require(missing.empty(), ErrorKind::InsufficientData, "dimensionality is missing fits:" + missing);

    auto plane = [](const AxisWidths& x, const AxisWidths& y, bool substituted) {
        PlaneDimensionality p;
        p.ratio_x = x.ratio();
        p.ratio_y = y.ratio();
        p.coverage_x = x.coverage;
        p.coverage_y = y.coverage;
        p.d_max = p.ratio_x * p.ratio_y;
        p.d = p.d_max * p.coverage_x * p.coverage_y;
        p.y_substituted = substituted;
        return p;
    };
    Dimensionality d;
    const bool sub = in.substitute_image_y || !in.image_y;
    d.position = plane(*in.image_x, sub ? *in.image_x : *in.image_y, sub);
    d.momentum = plane(*in.far_x, *in.far_y, false);
    return d;
}

// ---------------------------------------------------------------------------

double bootstrap_error(std::size_t blocks, const BlockStatistic& statistic, std::size_t resamples,
                       std::uint64_t seed) {
    require(blocks >= 10, ErrorKind::InsufficientData,
            "block bootstrap needs at least 10 blocks, got " + std::to_string(blocks));
    require(resamples >= 2, ErrorKind::InvalidParameter, "bootstrap needs at least 2 resamples");
    std::vector<double> values;
    values.reserve(resamples);
    std::vector<std::size_t> chosen(blocks);
    for (std::size_t r = 0; r < resamples; ++r) {
        rng::Engine engine = rng::make_engine(seed, rng::Stream::Bootstrap, r);
        std::uniform_int_distribution<std::size_t> pick(0, blocks - 1);
        for (auto& c : chosen) c = pick(engine);
        values.push_back(statistic(chosen));
    }
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(resamples);
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / static_cast<double>(resamples - 1));
}

}  // namespace eprcam::inference
