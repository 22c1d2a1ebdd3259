#include "eprcam/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "eprcam/error.hpp"
#include "eprcam/rng.hpp"
#include "eprcam/stackfile.hpp"

namespace eprcam::pipeline {

namespace {

rng::Stream stream_for(model::Plane plane) {
    return plane == model::Plane::ImagePlane ? rng::Stream::ImagePlane : rng::Stream::FarField;
}

model::OpticalSystem optics_for(const RunConfig& cfg, model::Plane plane) {
    return plane == model::Plane::ImagePlane ? cfg.optics.image_plane() : cfg.optics.far_field();
}

std::size_t frames_for(const RunConfig& cfg, model::Plane plane) {
    return plane == model::Plane::ImagePlane ? cfg.frames.image_plane : cfg.frames.far_field;
}

std::string plane_name(model::Plane plane) {
    return plane == model::Plane::ImagePlane ? "image-plane" : "far-field";
}

std::optional<inference::GaussianFit> fit_profile(const correlate::Profile& p, double center, int half_window) {
    std::vector<double> u;
    std::vector<double> y;
    inference::FitOptions options;
    for (std::size_t i = 0; i < p.coordinate.size(); ++i) {
        if (std::abs(p.coordinate[i] - center) > half_window) continue;
        u.push_back(p.coordinate[i]);
        y.push_back(p.value[i]);
        options.mask.push_back(p.masked[i]);
    }
    try {
        return inference::fit_gaussian(u, y, options);
    } catch (const Error&) {
        return std::nullopt;
    }
}

}  // namespace

emccd::RawFrame dark_frame(const RunConfig& cfg, std::size_t index) {
    rng::Engine engine = rng::make_engine(cfg.seed, rng::Stream::Dark, index);
    return emccd::expose({}, cfg.camera, engine);
}

emccd::RawFrame signal_frame(const RunConfig& cfg, model::Plane plane, std::size_t index) {
    rng::Engine engine = rng::make_engine(cfg.seed, stream_for(plane), index);
    const auto impacts = sampler::generate_frame_events(cfg.flux.flux_for(cfg.camera), optics_for(cfg, plane),
                                                        model::Biphoton::from(cfg.source), engine);
    return emccd::expose(impacts, cfg.camera, engine);
}

emccd::RawFrameSource dark_source(const RunConfig& cfg, std::size_t frames) {
    return [cfg, frames](const std::function<void(const emccd::RawFrame&)>& visit) {
        for (std::size_t i = 0; i < frames; ++i) visit(dark_frame(cfg, i));
    };
}

DarkCalibration calibrate_dark(const RunConfig& cfg, const emccd::RawFrameSource& dark) {
    DarkCalibration d;
    d.calibration = emccd::calibrate(dark);
    if (cfg.threshold_k) {
        d.threshold_k = *cfg.threshold_k;
    } else {
        d.threshold_k = emccd::calibrate_flux_equivalence(d.calibration, cfg.flux.photons_per_pixel);
        d.calibrated = true;
    }
    d.dark_occupancy = emccd::dark_occupancy(d.calibration, d.threshold_k);
    return d;
}

DarkCalibration calibrate_dark(const RunConfig& cfg) {
    return calibrate_dark(cfg, dark_source(cfg, cfg.frames.dark));
}

BinarySource simulated_source(const RunConfig& cfg, model::Plane plane, std::size_t frames,
                              const DarkCalibration& dark) {
    auto index = std::make_shared<std::size_t>(0);
    return [cfg, plane, frames, dark, index](emccd::BinaryFrame& frame) {
        if (*index >= frames) return false;
        frame = emccd::threshold(signal_frame(cfg, plane, *index), dark.calibration, dark.threshold_k);
        ++*index;
        return true;
    };
}

PlaneAnalysis analyze_plane(const BinarySource& source, std::size_t frames, model::Plane plane,
                            const RunConfig& cfg) {
    const int width = cfg.camera.width;
    const int height = cfg.camera.height;
    const bool image = plane == model::Plane::ImagePlane;
    correlate::EngineOptions engine_options;
    engine_options.sparse_max_ones = cfg.analysis.sparse_max_ones;
    correlate::CorrelationEngine engine(image ? correlate::CorrelationMode::Difference
                                              : correlate::CorrelationMode::Sum,
                                        width, height, engine_options);

    const std::size_t block_count = std::clamp<std::size_t>(cfg.analysis.bootstrap_blocks, 1, std::max<std::size_t>(frames, 1));
    const std::size_t block_size = (std::max<std::size_t>(frames, 1) + block_count - 1) / block_count;
    std::vector<correlate::JointAccumulator> blocks_x(block_count, correlate::JointAccumulator(correlate::Axis::X, width, height));
    std::vector<correlate::JointAccumulator> blocks_y(block_count, correlate::JointAccumulator(correlate::Axis::Y, width, height));

    PlaneAnalysis out;
    out.plane = plane;
    emccd::BinaryFrame frame;
    double occupancy = 0.0;
    std::size_t n = 0;
    while (source(frame)) {
        engine.add(frame);
        const std::size_t b = std::min(n / block_size, block_count - 1);
        blocks_x[b].add(frame);
        blocks_y[b].add(frame);
        occupancy += frame.occupancy();
        ++n;
    }
    require(n >= 2, ErrorKind::InsufficientData,
            plane_name(plane) + " analysis needs at least 2 frames, got " + std::to_string(n));
    out.frames = n;
    out.mean_occupancy = occupancy / static_cast<double>(n);
    out.engine = engine.stats();
    out.scale = optics_for(cfg, plane).scale(cfg.source.dc_wavenumber_per_um()) * cfg.camera.pixel_pitch_um;

    out.signal = engine.signal();
    out.reference = engine.reference();
    out.subtracted = correlate::subtract(out.signal, out.reference, cfg.masks);
    out.peak = correlate::peak_snr(out.subtracted, out.signal, out.reference, cfg.analysis.peak_radius);

    constexpr int half_window = 25;
    const auto& sub = out.subtracted;
    out.peak_widths.u = fit_profile(correlate::row_profile(sub, sub.peak_v()), sub.peak_u(), half_window);
    out.peak_widths.v = fit_profile(correlate::column_profile(sub, sub.peak_u()), sub.peak_v(), half_window);
    if (out.peak_widths.u) {
        out.peak_widths.sigma_u_um = out.peak_widths.u->sigma * cfg.camera.pixel_pitch_um;
    } else {
        out.notes.push_back("correlation peak fit along x failed");
    }
    if (out.peak_widths.v) {
        out.peak_widths.sigma_v_um = out.peak_widths.v->sigma * cfg.camera.pixel_pitch_um;
    } else {
        out.notes.push_back("correlation peak fit along y failed");
    }

    correlate::JointAccumulator total_x = blocks_x.front();
    correlate::JointAccumulator total_y = blocks_y.front();
    for (std::size_t b = 1; b < block_count; ++b) {
        total_x += blocks_x[b];
        total_y += blocks_y[b];
    }
    out.joint_x = total_x.result(plane, true);
    out.joint_y = total_y.result(plane, true);
    try {
        out.widths_x = inference::projection_widths(out.joint_x);
    } catch (const Error& e) {
        out.notes.push_back(std::string("x projection fit failed: ") + e.what());
    }
    try {
        out.widths_y = inference::projection_widths(out.joint_y);
    } catch (const Error& e) {
        out.notes.push_back(std::string("y projection fit failed: ") + e.what());
    }

    inference::InferenceOptions options;
    options.weight_floor = cfg.analysis.weight_floor;
    const std::uint64_t boot_seed = rng::derive_seed(cfg.seed, rng::Stream::Bootstrap, image ? 0 : 1);
    auto estimate = [&](inference::Direction dir) -> std::optional<inference::VarianceEstimate> {
        inference::VarianceEstimate est;
        try {
            est.variance = inference::min_inferred_variance(out.joint_x, dir, out.scale, options);
        } catch (const Error& e) {
            out.notes.push_back(std::string("minimum inferred variance unavailable: ") + e.what());
            return std::nullopt;
        }
        if (block_count < 10) {
            out.notes.push_back("too few frames for a block bootstrap; errors omitted");
            return est;
        }
        try {
            auto statistic = [&](std::span<const std::size_t> chosen) {
                correlate::JointAccumulator acc = blocks_x[chosen.front()];
                for (std::size_t i = 1; i < chosen.size(); ++i) acc += blocks_x[chosen[i]];
                return inference::min_inferred_variance(acc.result(plane, true), dir, out.scale, options).value;
            };
            est.error = inference::bootstrap_error(block_count, statistic, cfg.analysis.bootstrap_resamples,
                                                   boot_seed + (dir == inference::Direction::FirstGivenSecond ? 0 : 1));
        } catch (const Error& e) {
            out.notes.push_back(std::string("bootstrap failed: ") + e.what());
        }
        return est;
    };
    out.first_given_second = estimate(inference::Direction::FirstGivenSecond);
    out.second_given_first = estimate(inference::Direction::SecondGivenFirst);
    return out;
}

inference::EprReport make_report(const PlaneAnalysis* image, const PlaneAnalysis* far, const RunConfig&) {
    inference::EprReport r;
    if (image) {
        r.x1_given_x2 = image->first_given_second;
        r.x2_given_x1 = image->second_given_first;
    }
    if (far) {
        r.p1_given_p2 = far->first_given_second;
        r.p2_given_p1 = far->second_given_first;
    }

    auto product = [](const inference::VarianceEstimate& x, const inference::VarianceEstimate& p) {
        inference::ProductEstimate e;
        e.product = inference::epr_product(x.variance.value, p.variance.value);
        const double rx = x.variance.value > 0.0 ? x.error / x.variance.value : 0.0;
        const double rp = p.variance.value > 0.0 ? p.error / p.variance.value : 0.0;
        e.error = e.product.product * std::hypot(rx, rp);
        return e;
    };
    if (!image || !far) {
        r.notes.push_back(std::string("EPR product needs both planes; missing") + (image ? "" : " image-plane") +
                          (far ? "" : " far-field"));
    } else {
        if (r.x1_given_x2 && r.p1_given_p2) {
            r.product_1 = product(*r.x1_given_x2, *r.p1_given_p2);
        } else {
            r.notes.push_back("product 1 unavailable: a conditional variance could not be inferred");
        }
        if (r.x2_given_x1 && r.p2_given_p1) {
            r.product_2 = product(*r.x2_given_x1, *r.p2_given_p1);
        } else {
            r.notes.push_back("product 2 unavailable: a conditional variance could not be inferred");
        }
    }

    inference::DimensionalityInputs in;
    if (image) {
        in.image_x = image->widths_x;
        in.image_y = image->widths_y;
    }
    if (far) {
        in.far_x = far->widths_x;
        in.far_y = far->widths_y;
    }
    in.substitute_image_y = true;
    std::string loose;
    auto check = [&](const std::optional<inference::AxisWidths>& w, const char* name) {
        if (w && !w->well_constrained()) loose += std::string(" ") + name;
    };
    check(in.image_x, "image-x");
    check(in.far_x, "far-x");
    check(in.far_y, "far-y");
    if (!loose.empty()) r.notes.push_back("dimensionality uses poorly constrained width fits:" + loose);
    try {
        r.dimensionality = inference::dimensionality(in);
    } catch (const Error& e) {
        r.notes.push_back(e.what());
    }
    return r;
}

RunResult run_simulated(const RunConfig& cfg, bool image_plane, bool far_field) {
    cfg.validate();
    RunResult r;
    r.config = cfg;
    r.digest = config::digest(cfg);
    r.dark = calibrate_dark(cfg);
    for (model::Plane plane : {model::Plane::ImagePlane, model::Plane::FarField}) {
        const bool wanted = plane == model::Plane::ImagePlane ? image_plane : far_field;
        if (!wanted) continue;
        const std::size_t n = frames_for(cfg, plane);
        auto analysis = analyze_plane(simulated_source(cfg, plane, n, r.dark), n, plane, cfg);
        (plane == model::Plane::ImagePlane ? r.image : r.far) = std::move(analysis);
    }
    r.report = make_report(r.image ? &*r.image : nullptr, r.far ? &*r.far : nullptr, cfg);
    return r;
}

// ---------------------------------------------------------------------------

SimulatedFiles simulate_to_files(const RunConfig& cfg, bool image_plane, bool far_field) {
    cfg.validate();
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(cfg.output_dir, ec);
    require(!ec, ErrorKind::Io, "cannot create output directory '" + cfg.output_dir.string() + "': " + ec.message());

    SimulatedFiles files;
    files.config = cfg.output_dir / "config.json";
    config::save(cfg, files.config);

    stackfile::Header header;
    header.width = static_cast<std::uint32_t>(cfg.camera.width);
    header.height = static_cast<std::uint32_t>(cfg.camera.height);
    header.seed = cfg.seed;
    header.digest = config::digest(cfg);

    files.dark = cfg.output_dir / "dark.bpcm";
    {
        stackfile::Header h = header;
        h.kind = stackfile::Kind::Raw;
        h.plane = stackfile::PlaneTag::Dark;
        stackfile::Writer w(files.dark, h);
        for (std::size_t i = 0; i < cfg.frames.dark; ++i) w.write(dark_frame(cfg, i));
        w.close();
    }
    const DarkCalibration dark = calibrate_dark(cfg);

    files.calibration = cfg.output_dir / "calibration.json";
    {
        nlohmann::json j = {
            {"frames", dark.calibration.frames},
            {"readout_center", dark.calibration.readout_center},
            {"sigma_noise", dark.calibration.sigma_noise},
            {"threshold_k", dark.threshold_k},
            {"threshold_calibrated", dark.calibrated},
            {"dark_occupancy", dark.dark_occupancy},
            {"config_digest", config::to_hex(header.digest)},
        };
        std::ofstream out(files.calibration);
        require(out.good(), ErrorKind::Io, "cannot write '" + files.calibration.string() + "'");
        out << j.dump(2) << '\n';
    }

    for (model::Plane plane : {model::Plane::ImagePlane, model::Plane::FarField}) {
        const bool wanted = plane == model::Plane::ImagePlane ? image_plane : far_field;
        if (!wanted) continue;
        const fs::path path = cfg.output_dir / (plane == model::Plane::ImagePlane ? "image.bpcm" : "far_field.bpcm");
        stackfile::Header h = header;
        h.kind = stackfile::Kind::Binary;
        h.plane = stackfile::tag_for(plane);
        stackfile::Writer w(path, h);
        const std::size_t n = frames_for(cfg, plane);
        for (std::size_t i = 0; i < n; ++i) {
            w.write(emccd::threshold(signal_frame(cfg, plane, i), dark.calibration, dark.threshold_k));
        }
        w.close();
        (plane == model::Plane::ImagePlane ? files.image : files.far) = path;
    }
    return files;
}

RunResult analyze_files(const RunConfig& cfg, const std::optional<std::filesystem::path>& image,
                        const std::optional<std::filesystem::path>& far) {
    require(image || far, ErrorKind::InvalidParameter, "analyze needs at least one stack");
    RunResult r;
    r.config = cfg;
    r.digest = config::digest(cfg);

    std::optional<stackfile::Header> first;
    auto check = [&](const std::filesystem::path& path, model::Plane plane) {
        const stackfile::Header h = stackfile::read_header(path);
        require(h.kind == stackfile::Kind::Binary, ErrorKind::Format,
                path.string() + ": analyze expects a binary stack, found " + std::string(stackfile::to_string(h.kind)));
        require(h.plane == stackfile::tag_for(plane), ErrorKind::Format,
                path.string() + ": expected a " + std::string(stackfile::to_string(stackfile::tag_for(plane))) +
                    " stack, found " + std::string(stackfile::to_string(h.plane)));
        require(h.width == static_cast<std::uint32_t>(cfg.camera.width) &&
                    h.height == static_cast<std::uint32_t>(cfg.camera.height),
                ErrorKind::DimensionMismatch,
                path.string() + ": frames are " + std::to_string(h.width) + "x" + std::to_string(h.height) +
                    ", config ROI is " + std::to_string(cfg.camera.width) + "x" + std::to_string(cfg.camera.height));
        if (first) {
            require(h.digest == first->digest, ErrorKind::Format,
                    path.string() + ": config digest differs from the other stack");
        } else {
            first = h;
        }
        stackfile::Reader probe(path);  // validates the payload length
        return h;
    };
    if (image) check(*image, model::Plane::ImagePlane);
    if (far) check(*far, model::Plane::FarField);
    // Calibration summary written by simulate, for the report's provenance.
    const auto cal_path = (image ? *image : *far).parent_path() / "calibration.json";
    if (std::filesystem::exists(cal_path)) {
        std::ifstream in(cal_path);
        try {
            const auto j = nlohmann::json::parse(in);
            r.dark.calibration.frames = j.at("frames").get<std::size_t>();
            r.dark.calibration.readout_center = j.at("readout_center").get<double>();
            r.dark.calibration.sigma_noise = j.at("sigma_noise").get<double>();
            r.dark.threshold_k = j.at("threshold_k").get<double>();
            r.dark.calibrated = j.at("threshold_calibrated").get<bool>();
            r.dark.dark_occupancy = j.at("dark_occupancy").get<double>();
            if (first && j.at("config_digest").get<std::string>() != config::to_hex(first->digest)) {
                r.report.notes.push_back(cal_path.string() + " belongs to a different configuration");
            }
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorKind::Format, cal_path.string() + ": " + e.what());
        }
    } else {
        r.report.notes.push_back("no calibration.json beside the stacks; calibration fields are empty");
    }
    if (first && first->digest != r.digest) {
        r.report.notes.push_back("stack config digest " + config::to_hex(first->digest) +
                                 " differs from the analysis config " + config::to_hex(r.digest));
    }

    auto run = [&](const std::filesystem::path& path, model::Plane plane) {
        auto reader = std::make_shared<stackfile::Reader>(path);
        const std::size_t n = reader->header().frame_count;
        return analyze_plane([reader](emccd::BinaryFrame& f) { return reader->next(f); }, n, plane, cfg);
    };
    if (image) r.image = run(*image, model::Plane::ImagePlane);
    if (far) r.far = run(*far, model::Plane::FarField);

    std::vector<std::string> notes = std::move(r.report.notes);
    r.report = make_report(r.image ? &*r.image : nullptr, r.far ? &*r.far : nullptr, cfg);
    r.report.notes.insert(r.report.notes.begin(), notes.begin(), notes.end());
    return r;
}

}  // namespace eprcam::pipeline
