#include "eprcam/report.hpp"

#include <cstdio>
#include <ostream>
#include <sstream>

#include "eprcam/error.hpp"

namespace eprcam::report {

namespace {

json variance_json(const std::optional<inference::VarianceEstimate>& v) {
    if (!v) return nullptr;
    return {
        {"value", v->variance.value},
        {"deconvolved", v->variance.deconvolved},
        {"detector_px2", v->variance.detector_px2},
        {"error", v->error},
        {"slices_used", v->variance.slices_used},
        {"fitted_slices", v->variance.fitted_slices},
        {"moment_fallbacks", v->variance.moment_fallbacks},
        {"clamped_bins", v->variance.clamped_bins},
    };
}

json product_json(const std::optional<inference::ProductEstimate>& p) {
    if (!p) return nullptr;
    return {
        {"value", p->product.product},
        {"error", p->error},
        {"violation", p->product.violation},
        {"violation_factor", p->product.violation_factor},
    };
}

json widths_json(const std::optional<inference::AxisWidths>& w) {
    if (!w) return nullptr;
    return {
        {"narrow_px", w->narrow_px},
        {"narrow_error", w->narrow_error},
        {"wide_px", w->wide_px},
        {"wide_error", w->wide_error},
        {"ratio", w->ratio()},
        {"marginal_sigma_px", w->marginal_sigma_px},
        {"marginal_center_px", w->marginal_center_px},
        {"coverage", w->coverage},
        {"difference_fit", to_json(w->difference)},
        {"sum_fit", to_json(w->sum)},
    };
}

json plane_dim_json(const inference::PlaneDimensionality& d) {
    return {
        {"ratio_x", d.ratio_x},     {"ratio_y", d.ratio_y}, {"coverage_x", d.coverage_x},
        {"coverage_y", d.coverage_y}, {"d_max", d.d_max},   {"d", d.d},
        {"y_substituted", d.y_substituted},
    };
}

const json& field(const json& j, const char* key, const char* where) {
    if (!j.is_object() || !j.contains(key)) {
        fail(ErrorKind::Format, std::string("malformed report: missing '") + key + "' in " + where);
    }
    return j.at(key);
}

std::string num(const json& v, const char* fmt = "%.4g") {
    if (!v.is_number()) return "-";
    char buf[64];
    std::snprintf(buf, sizeof buf, fmt, v.get<double>());
    return buf;
}

}  // namespace

json to_json(const model::AnalyticPrediction& p) {
    return {
        {"sigma_minus_um", p.sigma_minus_um},
        {"sigma_pos_um", p.sigma_pos_um},
        {"sigma_mom_um", p.sigma_mom_um},
        {"mode_count", p.mode_count},
        {"cond_var_x_um2", p.cond_var_x_um2},
        {"cond_var_p_per_um2", p.cond_var_p_per_um2},
        {"epr_product_hbar2", p.epr_product},
    };
}

json to_json(const inference::GaussianFit& f) {
    return {
        {"amplitude", f.amplitude},   {"mean", f.mean},
        {"sigma", f.sigma},           {"baseline", f.baseline},
        {"amplitude_error", f.amplitude_error}, {"mean_error", f.mean_error},
        {"sigma_error", f.sigma_error}, {"baseline_error", f.baseline_error},
        {"residual_norm", f.residual_norm}, {"iterations", f.iterations},
        {"well_constrained", f.well_constrained},
    };
}

json to_json(const correlate::SubtractedMap& m) {
    json masked = json::array();
    for (const auto& p : m.masked_bins()) masked.push_back({p.x, p.y});
    std::vector<double> values(m.values().begin(), m.values().end());
    return {
        {"mode", std::string(correlate::to_string(m.mode()))},
        {"u_min", m.u_min()},
        {"v_min", m.v_min()},
        {"width", m.grid_width()},
        {"height", m.grid_height()},
        {"peak_u", m.peak_u()},
        {"peak_v", m.peak_v()},
        {"frames", m.frames},
        {"reference_scale", m.reference_scale},
        {"masked", masked},
        {"values", values},
    };
}

json to_json(const pipeline::PlaneAnalysis& a) {
    json j = {
        {"plane", std::string(model::to_string(a.plane))},
        {"frames", a.frames},
        {"mean_occupancy", a.mean_occupancy},
        {"scale_per_px", a.scale},
        {"engine", {{"sparse_frames", a.engine.sparse_frames},
                    {"spectral_frames", a.engine.spectral_frames},
                    {"sparse_pairs", a.engine.sparse_pairs},
                    {"spectral_pairs", a.engine.spectral_pairs}}},
        {"peak", {{"signal", a.peak.signal}, {"noise", a.peak.noise}, {"snr", a.peak.snr},
                  {"radius", a.peak.radius}, {"bins", a.peak.bins}}},
        {"peak_widths", {{"sigma_u_um", a.peak_widths.sigma_u_um},
                         {"sigma_v_um", a.peak_widths.sigma_v_um},
                         {"fit_u", a.peak_widths.u ? to_json(*a.peak_widths.u) : json(nullptr)},
                         {"fit_v", a.peak_widths.v ? to_json(*a.peak_widths.v) : json(nullptr)}}},
        {"widths_x", widths_json(a.widths_x)},
        {"widths_y", widths_json(a.widths_y)},
        {"first_given_second", variance_json(a.first_given_second)},
        {"second_given_first", variance_json(a.second_given_first)},
        {"notes", a.notes},
        {"map", to_json(a.subtracted)},
    };
    return j;
}

json to_json(const inference::EprReport& r) {
    json j = {
        {"x1_given_x2_um2", variance_json(r.x1_given_x2)},
        {"x2_given_x1_um2", variance_json(r.x2_given_x1)},
        {"p1_given_p2_hbar2_per_um2", variance_json(r.p1_given_p2)},
        {"p2_given_p1_hbar2_per_um2", variance_json(r.p2_given_p1)},
        {"product_1_hbar2", product_json(r.product_1)},
        {"product_2_hbar2", product_json(r.product_2)},
        {"violation", r.violation()},
        {"notes", r.notes},
    };
    if (r.dimensionality) {
        j["dimensionality"] = {{"position", plane_dim_json(r.dimensionality->position)},
                               {"momentum", plane_dim_json(r.dimensionality->momentum)}};
    } else {
        j["dimensionality"] = nullptr;
    }
    return j;
}

json to_json(const pipeline::RunResult& run) {
    const auto& cfg = run.config;
    const auto prediction = model::predict(cfg.source, cfg.optics.image_plane(), cfg.optics.far_field());
    json j = {
        {"format", "eprcam-report"},
        {"version", 1},
        {"seed", cfg.seed},
        {"config_digest", config::to_hex(run.digest)},
        {"config", config::to_json(cfg)},
        {"prediction", to_json(prediction)},
        {"calibration", {{"frames", run.dark.calibration.frames},
                         {"readout_center", run.dark.calibration.readout_center},
                         {"sigma_noise", run.dark.calibration.sigma_noise},
                         {"threshold_k", run.dark.threshold_k},
                         {"threshold_calibrated", run.dark.calibrated},
                         {"dark_occupancy", run.dark.dark_occupancy}}},
        {"image_plane", run.image ? to_json(*run.image) : json(nullptr)},
        {"far_field", run.far ? to_json(*run.far) : json(nullptr)},
        {"epr", to_json(run.report)},
    };
    return j;
}

// ---------------------------------------------------------------------------

std::string format_table(const json& report) {
    if (!report.is_object()) fail(ErrorKind::Format, "malformed report: not a JSON object");
    const json& format = field(report, "format", "report");
    if (!format.is_string() || format.get<std::string>() != "eprcam-report") {
        fail(ErrorKind::Format, "malformed report: format is not 'eprcam-report'");
    }
    const json& epr = field(report, "epr", "report");
    std::ostringstream os;
    char line[256];
    auto row = [&](const std::string& name, const std::string& value, const std::string& error,
                   const std::string& extra = "") {
        std::snprintf(line, sizeof line, "%-28s %14s %12s  %s\n", name.c_str(), value.c_str(), error.c_str(),
                      extra.c_str());
        os << line;
    };
    row("quantity", "value", "error");
    os << std::string(62, '-') << '\n';

    auto variance = [&](const char* key, const std::string& label) {
        const json& v = field(epr, key, "epr");
        if (v.is_null()) {
            row(label, "-", "-", "unavailable");
        } else {
            row(label, num(field(v, "value", key)), num(field(v, "error", key)),
                "deconvolved " + num(field(v, "deconvolved", key)));
        }
    };
    variance("x1_given_x2_um2", "D2min(x1|x2) [um^2]");
    variance("x2_given_x1_um2", "D2min(x2|x1) [um^2]");
    variance("p1_given_p2_hbar2_per_um2", "D2min(p1|p2) [hbar^2/um^2]");
    variance("p2_given_p1_hbar2_per_um2", "D2min(p2|p1) [hbar^2/um^2]");

    auto product = [&](const char* key, const std::string& label) {
        const json& p = field(epr, key, "epr");
        if (p.is_null()) {
            row(label, "-", "-", "unavailable");
            return;
        }
        const bool v = field(p, "violation", key).get<bool>();
        row(label, num(field(p, "value", key)), num(field(p, "error", key)),
            v ? "violation x" + num(field(p, "violation_factor", key), "%.3g") : "no violation");
    };
    product("product_1_hbar2", "D2min(x1|x2) D2min(p1|p2)");
    product("product_2_hbar2", "D2min(x2|x1) D2min(p2|p1)");

    const json& dim = field(epr, "dimensionality", "epr");
    if (!dim.is_null()) {
        const json& pos = field(dim, "position", "dimensionality");
        const json& mom = field(dim, "momentum", "dimensionality");
        row("D_pos", num(field(pos, "d", "position"), "%.0f"), "-",
            "D_max " + num(field(pos, "d_max", "position"), "%.0f"));
        row("D_mom", num(field(mom, "d", "momentum"), "%.0f"), "-",
            "D_max " + num(field(mom, "d_max", "momentum"), "%.0f"));
    } else {
        row("D_pos", "-", "-", "unavailable");
        row("D_mom", "-", "-", "unavailable");
    }
    for (const char* plane : {"image_plane", "far_field"}) {
        if (!report.contains(plane) || report.at(plane).is_null()) continue;
        const json& a = report.at(plane);
        const json& peak = field(a, "peak", plane);
        const json& widths = field(a, "peak_widths", plane);
        row(std::string(plane) + " peak SNR", num(field(peak, "snr", "peak"), "%.1f"), "-",
            "sigma_x " + num(field(widths, "sigma_u_um", "peak_widths"), "%.1f") + " um");
    }
    os << std::string(62, '-') << '\n';
    os << "EPR violation: " << (field(epr, "violation", "epr").get<bool>() ? "yes" : "no") << '\n';
    return os.str();
}

void write_map_csv(const json& map, std::ostream& out) {
    out << "u,v,value,masked\n";
    if (map.is_null() || !map.contains("values") || map.at("values").empty()) return;
    const int w = field(map, "width", "map").get<int>();
    const int h = field(map, "height", "map").get<int>();
    const int u0 = field(map, "u_min", "map").get<int>();
    const int v0 = field(map, "v_min", "map").get<int>();
    const json& values = map.at("values");
    if (values.size() != static_cast<std::size_t>(w) * h) {
        fail(ErrorKind::Format, "malformed report: map values do not match its dimensions");
    }
    std::vector<std::uint8_t> masked(values.size(), 0);
    for (const auto& m : field(map, "masked", "map")) {
        masked[static_cast<std::size_t>(m.at(1).get<int>() - v0) * w + (m.at(0).get<int>() - u0)] = 1;
    }
    for (int iy = 0; iy < h; ++iy) {
        for (int ix = 0; ix < w; ++ix) {
            const std::size_t i = static_cast<std::size_t>(iy) * w + ix;
            out << ix + u0 << ',' << iy + v0 << ',' << values[i].get<double>() << ',' << int(masked[i]) << '\n';
        }
    }
}

void write_cross_section_csv(const json& map, bool along_u, int at, std::ostream& out) {
    out << (along_u ? "u" : "v") << ",value,masked\n";
    if (map.is_null() || !map.contains("values") || map.at("values").empty()) return;
    const int w = field(map, "width", "map").get<int>();
    const int h = field(map, "height", "map").get<int>();
    const int u0 = field(map, "u_min", "map").get<int>();
    const int v0 = field(map, "v_min", "map").get<int>();
    const int fixed = along_u ? at - v0 : at - u0;
    require(fixed >= 0 && fixed < (along_u ? h : w), ErrorKind::InvalidParameter,
            "cross-section coordinate " + std::to_string(at) + " is outside the map");
    std::vector<std::uint8_t> masked(static_cast<std::size_t>(w) * h, 0);
    for (const auto& m : field(map, "masked", "map")) {
        masked[static_cast<std::size_t>(m.at(1).get<int>() - v0) * w + (m.at(0).get<int>() - u0)] = 1;
    }
    const json& values = map.at("values");
    const int n = along_u ? w : h;
    for (int k = 0; k < n; ++k) {
        const std::size_t i = along_u ? static_cast<std::size_t>(fixed) * w + k : static_cast<std::size_t>(k) * w + fixed;
        out << k + (along_u ? u0 : v0) << ',' << values[i].get<double>() << ',' << int(masked[i]) << '\n';
    }
}

void write_joint_csv(const correlate::JointDistribution& joint, std::ostream& out) {
    out << "c1,c2,value\n";
    for (int c1 = 0; c1 < joint.size; ++c1) {
        for (int c2 = 0; c2 < joint.size; ++c2) out << c1 << ',' << c2 << ',' << joint.at(c1, c2) << '\n';
    }
}

}  // namespace eprcam::report
