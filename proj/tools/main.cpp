#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "eprcam/config.hpp"
#include "eprcam/error.hpp"
#include "eprcam/model.hpp"
#include "eprcam/pipeline.hpp"
#include "eprcam/report.hpp"

namespace fs = std::filesystem;
using namespace eprcam;
using nlohmann::json;

namespace {

constexpr const char* kOutputEnv = "EPRCAM_OUTPUT_DIR";

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string plane = "both";
    std::optional<std::size_t> frames;
    std::optional<std::size_t> dark_frames;
    std::optional<std::string> threshold_k;
    std::optional<std::string> output_dir;
    std::optional<bool> central_mask;
    std::optional<bool> smear_mask;
    std::optional<bool> self_pairs;
};

void add_config(CLI::App* cmd, Common& c) {
    cmd->add_option("-c,--config", c.config, "run configuration (JSON)")->check(CLI::ExistingFile);
}

void add_run_flags(CLI::App* cmd, Common& c) {
    cmd->add_option("--seed", c.seed, "master seed");
    cmd->add_option("--plane", c.plane, "image, far or both")
        ->check(CLI::IsMember({"image", "far", "both"}));
    cmd->add_option("--frames", c.frames, "signal frames per plane");
    cmd->add_option("-o,--output-dir", c.output_dir, std::string("output directory (default: $") + kOutputEnv +
                                                         " or the config value)");
}

void add_mask_flags(CLI::App* cmd, Common& c) {
    cmd->add_flag("--central-mask,!--no-central-mask", c.central_mask, "mask the central difference bin");
    cmd->add_flag("--mask-smear-rows,!--no-mask-smear-rows", c.smear_mask, "mask the dy = +-1 rows");
    cmd->add_flag("--self-pairs,!--no-self-pairs", c.self_pairs, "remove self-pairs before subtraction");
}

fs::path env_output_dir(const fs::path& fallback) {
    if (const char* env = std::getenv(kOutputEnv); env && *env) return env;
    return fallback;
}

config::RunConfig resolve(const Common& c, const fs::path& fallback_config = {}) {
    config::RunConfig cfg;
    if (!c.config.empty()) {
        cfg = config::load(c.config);
    } else if (!fallback_config.empty() && fs::exists(fallback_config)) {
        cfg = config::load(fallback_config);
    }
    if (c.seed) cfg.seed = *c.seed;
    if (c.frames) cfg.frames.image_plane = cfg.frames.far_field = *c.frames;
    if (c.dark_frames) cfg.frames.dark = *c.dark_frames;
    if (c.threshold_k) {
        if (*c.threshold_k == "calibrate") {
            cfg.threshold_k.reset();
        } else {
            try {
                cfg.threshold_k = std::stod(*c.threshold_k);
            } catch (const std::exception&) {
                fail(ErrorKind::InvalidParameter, "--threshold-k expects a number or 'calibrate'");
            }
        }
    }
    if (c.central_mask) cfg.masks.central = *c.central_mask;
    if (c.smear_mask) cfg.masks.smear_rows = *c.smear_mask;
    if (c.self_pairs) cfg.masks.self_pairs = *c.self_pairs;
    cfg.output_dir = c.output_dir ? fs::path(*c.output_dir) : env_output_dir(cfg.output_dir);
    cfg.validate();
    return cfg;
}

bool wants_image(const std::string& plane) { return plane != "far"; }
bool wants_far(const std::string& plane) { return plane != "image"; }

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path);
    require(out.good(), ErrorKind::Io, "cannot write '" + path.string() + "'");
    return out;
}

void write_plane_csvs(const pipeline::PlaneAnalysis& a, const fs::path& dir, const std::string& tag) {
    {
        auto out = open_out(dir / (tag + "_joint_x.csv"));
        report::write_joint_csv(a.joint_x, out);
    }
    {
        auto out = open_out(dir / (tag + "_joint_y.csv"));
        report::write_joint_csv(a.joint_y, out);
    }
}

void write_map_csvs(const json& rep, const fs::path& dir, std::optional<std::pair<bool, int>> section) {
    for (const char* key : {"image_plane", "far_field"}) {
        if (!rep.contains(key) || rep[key].is_null()) continue;
        const json& map = rep[key].at("map");
        {
            auto out = open_out(dir / (std::string(key) + "_map.csv"));
            report::write_map_csv(map, out);
        }
        if (section) {
            const std::string name = std::string(key) + (section->first ? "_section_u_at_v" : "_section_v_at_u") +
                                     std::to_string(section->second) + ".csv";
            auto out = open_out(dir / name);
            report::write_cross_section_csv(map, section->first, section->second, out);
        }
    }
}

int run_predict(const Common& c) {
    const auto cfg = resolve(c);
    const auto p = model::predict(cfg.source, cfg.optics.image_plane(), cfg.optics.far_field());
    std::cout << report::to_json(p).dump(2) << '\n';
    return 0;
}

int run_simulate(const Common& c) {
    const auto cfg = resolve(c);
    const auto files = pipeline::simulate_to_files(cfg, wants_image(c.plane), wants_far(c.plane));
    json out = {{"config", files.config.string()},
                {"calibration", files.calibration.string()},
                {"dark", files.dark.string()},
                {"config_digest", config::to_hex(config::digest(cfg))}};
    if (files.image) out["image_plane"] = files.image->string();
    if (files.far) out["far_field"] = files.far->string();
    std::cout << out.dump(2) << '\n';
    return 0;
}

int run_analyze(const Common& c, const std::string& input_dir, std::optional<std::string> image,
                std::optional<std::string> far) {
    const fs::path in = input_dir;
    auto cfg = resolve(c, in.empty() ? fs::path{} : in / "config.json");
    if (!image && !far) {
        require(!in.empty(), ErrorKind::InvalidParameter, "analyze needs --input-dir, --image or --far");
        if (wants_image(c.plane)) image = (in / "image.bpcm").string();
        if (wants_far(c.plane)) far = (in / "far_field.bpcm").string();
    }
    auto opt_path = [](const std::optional<std::string>& s) {
        return s ? std::optional<fs::path>(*s) : std::nullopt;
    };
    const auto result = pipeline::analyze_files(cfg, opt_path(image), opt_path(far));

    std::error_code ec;
    fs::create_directories(cfg.output_dir, ec);
    require(!ec, ErrorKind::Io, "cannot create output directory '" + cfg.output_dir.string() + "': " + ec.message());
    const json rep = report::to_json(result);
    {
        auto out = open_out(cfg.output_dir / "report.json");
        out << rep.dump(2) << '\n';
    }
    write_map_csvs(rep, cfg.output_dir, std::nullopt);
    if (result.image) write_plane_csvs(*result.image, cfg.output_dir, "image_plane");
    if (result.far) write_plane_csvs(*result.far, cfg.output_dir, "far_field");
    std::cout << report::format_table(rep);
    return 0;
}

int run_report(const std::string& path, const std::optional<std::string>& output_dir,
               const std::optional<std::string>& section) {
    std::ifstream in(path);
    require(in.good(), ErrorKind::Io, "cannot read '" + path + "'");
    json rep;
    try {
        rep = json::parse(in);
    } catch (const json::parse_error& e) {
        fail(ErrorKind::Format, path + ": " + e.what());
    }
    std::cout << report::format_table(rep);

    std::optional<std::pair<bool, int>> cut;
    if (section) {
        // "u:0" is a profile along u at v = 0.
        const auto colon = section->find(':');
        const std::string axis = section->substr(0, colon);
        require(colon != std::string::npos && (axis == "u" || axis == "v"), ErrorKind::InvalidParameter,
                "--cross-section expects u:<v> or v:<u>");
        try {
            cut = std::pair{axis == "u", std::stoi(section->substr(colon + 1))};
        } catch (const std::exception&) {
            fail(ErrorKind::InvalidParameter, "--cross-section expects u:<v> or v:<u>");
        }
    }
    const fs::path dir = output_dir ? fs::path(*output_dir) : env_output_dir(fs::path(path).parent_path());
    if (!dir.empty()) {
        std::error_code ec;
        fs::create_directories(dir, ec);
        require(!ec, ErrorKind::Io, "cannot create output directory '" + dir.string() + "': " + ec.message());
    }
    write_map_csvs(rep, dir.empty() ? fs::path(".") : dir, cut);
    return 0;
}

int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Schema:
        case ErrorKind::InvalidParameter: return 2;
        case ErrorKind::Io: return 3;
        case ErrorKind::Format:
        case ErrorKind::DimensionMismatch: return 4;
        default: return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulate and analyse photon-pair EPR correlations on an EMCCD"};
    app.require_subcommand(1);
    Common c;

    auto* predict = app.add_subcommand("predict", "print the analytic predictions as JSON");
    add_config(predict, c);

    auto* simulate = app.add_subcommand("simulate", "write dark and signal frame stacks");
    add_config(simulate, c);
    add_run_flags(simulate, c);
    simulate->add_option("--dark-frames", c.dark_frames, "dark calibration frames");
    simulate->add_option("--threshold-k", c.threshold_k, "threshold multiplier or 'calibrate'");

    std::string input_dir;
    std::optional<std::string> image, far;
    auto* analyze = app.add_subcommand("analyze", "analyse binary stacks and write the report and CSVs");
    add_config(analyze, c);
    add_run_flags(analyze, c);
    add_mask_flags(analyze, c);
    analyze->add_option("-i,--input-dir", input_dir, "directory written by simulate");
    analyze->add_option("--image", image, "image-plane stack")->check(CLI::ExistingFile);
    analyze->add_option("--far", far, "far-field stack")->check(CLI::ExistingFile);

    std::string report_path;
    std::optional<std::string> report_dir, section;
    auto* rep = app.add_subcommand("report", "print a report table and write plot CSVs");
    rep->add_option("report", report_path, "report.json written by analyze")->required();
    rep->add_option("-o,--output-dir", report_dir, "CSV directory (default: next to the report)");
    rep->add_option("--cross-section", section, "u:<v> or v:<u> profile of each map");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*predict) return run_predict(c);
        if (*simulate) return run_simulate(c);
        if (*analyze) return run_analyze(c, input_dir, image, far);
        if (*rep) return run_report(report_path, report_dir, section);
    } catch (const Error& e) {
        std::cerr << "eprcam: " << to_string(e.kind()) << " error: " << e.what() << '\n';
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "eprcam: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
