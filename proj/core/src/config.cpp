#include "eprcam/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include "eprcam/error.hpp"
#include "eprcam/units.hpp"

namespace eprcam::config {

using nlohmann::json;

namespace {

std::string_view to_string(emccd::GainModel g) {
    return g == emccd::GainModel::Exponential ? "exponential" : "deterministic";
}

/// Field access on one JSON object that records what was consumed, so
/// leftover keys can be reported.
class Fields {
public:
    Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) fail(ErrorKind::Schema, where() + " must be an object");
    }

    const json& raw(const std::string& key) {
        auto it = j_.find(key);
        if (it == j_.end()) fail(ErrorKind::Schema, "missing field '" + child(key) + "'");
        seen_.insert(key);
        return *it;
    }

    Fields object(const std::string& key) { return Fields(raw(key), child(key)); }

    double number(const std::string& key) {
        const json& v = raw(key);
        if (!v.is_number()) fail(ErrorKind::Schema, "field '" + child(key) + "' must be a number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) fail(ErrorKind::Schema, "field '" + child(key) + "' must be finite");
        return d;
    }

    std::uint64_t unsigned_integer(const std::string& key) {
        const json& v = raw(key);
        if (!v.is_number_unsigned()) {
            fail(ErrorKind::Schema, "field '" + child(key) + "' must be a non-negative integer");
        }
        return v.get<std::uint64_t>();
    }

    int integer(const std::string& key) {
        const json& v = raw(key);
        if (!v.is_number_integer()) fail(ErrorKind::Schema, "field '" + child(key) + "' must be an integer");
        return v.get<int>();
    }

    bool boolean(const std::string& key) {
        const json& v = raw(key);
        if (!v.is_boolean()) fail(ErrorKind::Schema, "field '" + child(key) + "' must be a boolean");
        return v.get<bool>();
    }

    std::string string(const std::string& key) {
        const json& v = raw(key);
        if (!v.is_string()) fail(ErrorKind::Schema, "field '" + child(key) + "' must be a string");
        return v.get<std::string>();
    }

    double length_um(const std::string& key) {
        const std::string s = string(key);
        try {
            return units::parse_length_um(s);
        } catch (const Error& e) {
            fail(ErrorKind::Schema, "field '" + child(key) + "': " + e.what());
        }
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!seen_.count(it.key())) fail(ErrorKind::Schema, "unknown field '" + child(it.key()) + "'");
        }
    }

private:
    std::string where() const { return path_.empty() ? "config" : "'" + path_ + "'"; }
    std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

template <typename F>
auto schema_checked(const std::string& field, F&& f) {
    try {
        return f();
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Schema) throw;
        fail(ErrorKind::Schema, "field '" + field + "': " + e.what());
    }
}

}  // namespace

sampler::FluxConfig FluxSettings::flux_for(const emccd::CameraParams& cam) const {
    return sampler::FluxConfig::for_detected_flux(photons_per_pixel * static_cast<double>(cam.pixels()),
                                                  cam.qe, transmission, attenuation);
}

void RunConfig::validate() const {
    source.validate();
    require(optics.magnification > 0.0, ErrorKind::InvalidParameter, "magnification must be positive");
    require(optics.effective_focal_mm > 0.0, ErrorKind::InvalidParameter,
            "effective focal length must be positive");
    camera.validate();
    if (threshold_k) {
        require(*threshold_k >= 0.0 && std::isfinite(*threshold_k), ErrorKind::InvalidParameter,
                "threshold_k must be >= 0");
    }
    require(flux.photons_per_pixel > 0.0 && flux.photons_per_pixel < 1.0, ErrorKind::InvalidParameter,
            "photons_per_pixel must lie in (0, 1)");
    flux.flux_for(camera).validate();
    require(frames.dark >= 2, ErrorKind::InvalidParameter, "dark stack needs at least 2 frames");
    require(analysis.weight_floor >= 0.0 && analysis.weight_floor < 1.0, ErrorKind::InvalidParameter,
            "weight_floor must lie in [0, 1)");
    require(analysis.bootstrap_blocks >= 10, ErrorKind::InvalidParameter,
            "bootstrap_blocks must be >= 10");
    require(analysis.peak_radius >= 0, ErrorKind::InvalidParameter, "peak_radius must be >= 0");
}

RunConfig from_json(const json& j) {
    RunConfig c;
    Fields root(j, "");

    {
        Fields s = root.object("source");
        c.source.pump_wavelength_nm = s.length_um("pump_wavelength") / units::um_per_nm;
        c.source.pump_waist_um = s.length_um("pump_waist");
        c.source.crystal_length_mm = s.length_um("crystal_length") / units::um_per_mm;
        c.source.alpha = s.number("alpha");
        s.finish();
    }
    {
        Fields o = root.object("optics");
        Fields ip = o.object("image_plane");
        c.optics.magnification = ip.number("magnification");
        ip.finish();
        Fields ff = o.object("far_field");
        c.optics.effective_focal_mm = ff.length_um("effective_focal_length") / units::um_per_mm;
        ff.finish();
        o.finish();
    }
    {
        Fields cam = root.object("camera");
        auto& p = c.camera;
        p.pixel_pitch_um = cam.length_um("pixel_pitch");
        p.width = cam.integer("width");
        p.height = cam.integer("height");
        p.qe = cam.number("qe");
        p.readout_mean = cam.number("readout_mean");
        p.readout_sigma = cam.number("readout_sigma");
        p.tail_prob = cam.number("tail_prob");
        p.tail_scale = cam.number("tail_scale");
        p.em_gain = cam.number("em_gain");
        const std::string gain = cam.string("gain_model");
        if (gain == "exponential") {
            p.gain_model = emccd::GainModel::Exponential;
        } else if (gain == "deterministic") {
            p.gain_model = emccd::GainModel::Deterministic;
        } else {
            fail(ErrorKind::Schema, "field 'camera.gain_model' must be 'exponential' or 'deterministic'");
        }
        p.cic_prob = cam.number("cic_prob");
        p.smear_prob = cam.number("smear_prob");
        p.full_well = cam.number("full_well");
        const json& k = cam.raw("threshold_k");
        if (k.is_string() && k.get<std::string>() == "calibrate") {
            c.threshold_k.reset();
        } else if (k.is_number()) {
            c.threshold_k = k.get<double>();
            p.threshold_k = *c.threshold_k;
        } else {
            fail(ErrorKind::Schema, "field 'camera.threshold_k' must be a number or \"calibrate\"");
        }
        cam.finish();
    }
    {
        Fields f = root.object("flux");
        c.flux.photons_per_pixel = f.number("photons_per_pixel");
        c.flux.transmission = f.number("transmission");
        const std::string att = f.string("attenuation");
        c.flux.attenuation = schema_checked("flux.attenuation", [&] { return sampler::attenuation_from_string(att); });
        f.finish();
    }
    {
        Fields fr = root.object("frames");
        c.frames.dark = fr.unsigned_integer("dark");
        c.frames.image_plane = fr.unsigned_integer("image_plane");
        c.frames.far_field = fr.unsigned_integer("far_field");
        fr.finish();
    }
    c.seed = root.unsigned_integer("seed");
    {
        Fields m = root.object("masks");
        c.masks.central = m.boolean("central");
        c.masks.smear_rows = m.boolean("smear_rows");
        c.masks.self_pairs = m.boolean("self_pairs");
        m.finish();
    }
    {
        Fields a = root.object("analysis");
        c.analysis.weight_floor = a.number("weight_floor");
        c.analysis.bootstrap_blocks = a.unsigned_integer("bootstrap_blocks");
        c.analysis.bootstrap_resamples = a.unsigned_integer("bootstrap_resamples");
        c.analysis.sparse_max_ones = a.unsigned_integer("sparse_max_ones");
        c.analysis.peak_radius = a.integer("peak_radius");
        a.finish();
    }
    {
        Fields o = root.object("output");
        c.output_dir = o.string("directory");
        o.finish();
    }
    root.finish();

    try {
        c.validate();
    } catch (const Error& e) {
        fail(ErrorKind::Schema, std::string("invalid config: ") + e.what());
    }
    return c;
}

json to_json(const RunConfig& c) {
    json j;
    j["source"] = {
        {"pump_wavelength", units::format_length(c.source.pump_wavelength_nm * units::um_per_nm, "nm")},
        {"pump_waist", units::format_length(c.source.pump_waist_um, "um")},
        {"crystal_length", units::format_length(c.source.crystal_length_mm * units::um_per_mm, "mm")},
        {"alpha", c.source.alpha},
    };
    j["optics"] = {
        {"image_plane", {{"magnification", c.optics.magnification}}},
        {"far_field", {{"effective_focal_length",
                        units::format_length(c.optics.effective_focal_mm * units::um_per_mm, "mm")}}},
    };
    const auto& p = c.camera;
    j["camera"] = {
        {"pixel_pitch", units::format_length(p.pixel_pitch_um, "um")},
        {"width", p.width},
        {"height", p.height},
        {"qe", p.qe},
        {"readout_mean", p.readout_mean},
        {"readout_sigma", p.readout_sigma},
        {"tail_prob", p.tail_prob},
        {"tail_scale", p.tail_scale},
        {"em_gain", p.em_gain},
        {"gain_model", std::string(to_string(p.gain_model))},
        {"cic_prob", p.cic_prob},
        {"smear_prob", p.smear_prob},
        {"full_well", p.full_well},
    };
    if (c.threshold_k) {
        j["camera"]["threshold_k"] = *c.threshold_k;
    } else {
        j["camera"]["threshold_k"] = "calibrate";
    }
    j["flux"] = {
        {"photons_per_pixel", c.flux.photons_per_pixel},
        {"transmission", c.flux.transmission},
        {"attenuation", std::string(sampler::to_string(c.flux.attenuation))},
    };
    j["frames"] = {
        {"dark", c.frames.dark},
        {"image_plane", c.frames.image_plane},
        {"far_field", c.frames.far_field},
    };
    j["seed"] = c.seed;
    j["masks"] = {
        {"central", c.masks.central},
        {"smear_rows", c.masks.smear_rows},
        {"self_pairs", c.masks.self_pairs},
    };
    j["analysis"] = {
        {"weight_floor", c.analysis.weight_floor},
        {"bootstrap_blocks", c.analysis.bootstrap_blocks},
        {"bootstrap_resamples", c.analysis.bootstrap_resamples},
        {"sparse_max_ones", c.analysis.sparse_max_ones},
        {"peak_radius", c.analysis.peak_radius},
    };
    j["output"] = {{"directory", c.output_dir.string()}};
    return j;
}

RunConfig load(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.good(), ErrorKind::Io, "cannot open config '" + path.string() + "'");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        fail(ErrorKind::Schema, "config '" + path.string() + "' is not valid JSON: " + e.what());
    }
    try {
        return from_json(j);
    } catch (const Error& e) {
        fail(e.kind(), path.string() + ": " + e.what());
    }
}

void save(const RunConfig& cfg, const std::filesystem::path& path) {
    std::ofstream out(path);
    require(out.good(), ErrorKind::Io, "cannot write config '" + path.string() + "'");
    out << to_json(cfg).dump(2) << '\n';
    require(out.good(), ErrorKind::Io, "failed writing config '" + path.string() + "'");
}

Digest digest(const RunConfig& cfg) {
    json j = to_json(cfg);
    j.erase("output");
    const std::string text = j.dump();
    Digest d{};
    unsigned int len = 0;
    const bool ok = EVP_Digest(text.data(), text.size(), d.data(), &len, EVP_sha256(), nullptr) == 1;
    require(ok && len == d.size(), ErrorKind::Internal, "SHA-256 computation failed");
    return d;
}

std::string to_hex(const Digest& d) {
    static constexpr char hex[] = "0123456789abcdef";
    std::string s;
    s.reserve(2 * d.size());
    for (auto b : d) {
        s += hex[b >> 4];
        s += hex[b & 0xF];
    }
    return s;
}

}  // namespace eprcam::config
