#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "eprcam/error.hpp"
#include "eprcam/pipeline.hpp"
#include "eprcam/report.hpp"
#include "eprcam/stackfile.hpp"

using namespace eprcam;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

config::RunConfig small_config(const std::string& dir) {
    config::RunConfig c;
    c.seed = 7;
    c.frames.dark = 40;
    c.frames.image_plane = 100;
    c.frames.far_field = 100;
    c.analysis.bootstrap_resamples = 4;
    c.output_dir = fs::temp_directory_path() / dir;
    fs::remove_all(c.output_dir);
    return c;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(Pipeline, SimulateIsByteIdenticalUnderSeed) {
    auto c = small_config("eprcam_sim_det");
    const std::vector<std::string> names{"dark.bpcm", "image.bpcm", "far_field.bpcm", "calibration.json",
                                         "config.json"};
    pipeline::simulate_to_files(c, true, true);
    std::vector<std::string> first;
    for (const auto& n : names) first.push_back(slurp(c.output_dir / n));
    fs::remove_all(c.output_dir);
    pipeline::simulate_to_files(c, true, true);
    for (std::size_t i = 0; i < names.size(); ++i) {
        EXPECT_TRUE(slurp(c.output_dir / names[i]) == first[i]) << names[i];
    }
    c.seed = 8;
    pipeline::simulate_to_files(c, true, false);
    EXPECT_FALSE(slurp(c.output_dir / "image.bpcm") == first[1]);
    fs::remove_all(c.output_dir);
}

TEST(Pipeline, StacksShareConfigDigest) {
    const auto c = small_config("eprcam_sim_digest");
    const auto files = pipeline::simulate_to_files(c, true, true);
    const auto hi = stackfile::read_header(*files.image);
    const auto hf = stackfile::read_header(*files.far);
    const auto hd = stackfile::read_header(files.dark);
    EXPECT_EQ(hi.digest, hf.digest);
    EXPECT_EQ(hi.digest, hd.digest);
    EXPECT_EQ(hi.digest, config::digest(c));
    EXPECT_EQ(hi.kind, stackfile::Kind::Binary);
    EXPECT_EQ(hd.kind, stackfile::Kind::Raw);
    EXPECT_EQ(hf.plane, stackfile::PlaneTag::FarField);
    EXPECT_EQ(hi.frame_count, 100u);
    EXPECT_EQ(hd.frame_count, 40u);
    fs::remove_all(c.output_dir);
}

TEST(Pipeline, OccupancyIsSignalPlusNoise) {
    const auto c = small_config("eprcam_occ");
    const auto dark = pipeline::calibrate_dark(c);
    EXPECT_TRUE(dark.calibrated);
    EXPECT_NEAR(dark.dark_occupancy, c.flux.photons_per_pixel, 0.002);
    for (auto plane : {model::Plane::ImagePlane, model::Plane::FarField}) {
        auto src = pipeline::simulated_source(c, plane, 50, dark);
        emccd::BinaryFrame f;
        double occ = 0;
        int n = 0;
        while (src(f)) {
            occ += f.occupancy();
            ++n;
        }
        EXPECT_EQ(n, 50);
        // Noise-equivalent threshold: dark counts match the photon flux, less
        // the photons that leave the ROI or share a pixel.
        EXPECT_NEAR(occ / n, 2.0 * c.flux.photons_per_pixel, 0.006);
    }
}

TEST(Pipeline, FixedThresholdSkipsCalibration) {
    auto c = small_config("eprcam_fixed");
    c.threshold_k = 3.0;
    const auto dark = pipeline::calibrate_dark(c);
    EXPECT_FALSE(dark.calibrated);
    EXPECT_DOUBLE_EQ(dark.threshold_k, 3.0);
    EXPECT_LT(dark.dark_occupancy, 0.02);
}

TEST(Pipeline, FramesRegenerateIdentically) {
    const auto c = small_config("eprcam_regen");
    const auto a = pipeline::signal_frame(c, model::Plane::FarField, 12);
    const auto b = pipeline::signal_frame(c, model::Plane::FarField, 12);
    EXPECT_EQ(a.electrons, b.electrons);
    EXPECT_NE(a.electrons, pipeline::signal_frame(c, model::Plane::FarField, 13).electrons);
}

TEST(Pipeline, AnalyzeRejectsMismatchedStacksBeforeCompute) {
    auto c = small_config("eprcam_mismatch");
    const auto files = pipeline::simulate_to_files(c, true, true);
    // Raw dark stack where a binary stack is expected.
    EXPECT_THROW(pipeline::analyze_files(c, files.dark, std::nullopt), Error);
    // Far-field stack passed as the image plane.
    EXPECT_THROW(pipeline::analyze_files(c, files.far, std::nullopt), Error);
    // Stacks from different configurations.
    auto other = small_config("eprcam_mismatch_other");
    other.seed = 123;
    const auto of = pipeline::simulate_to_files(other, false, true);
    try {
        pipeline::analyze_files(c, files.image, of.far);
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("digest"), std::string::npos);
    }
    // Dimensions that disagree with the configured ROI.
    auto wrong = c;
    wrong.camera.width = 100;
    EXPECT_THROW(pipeline::analyze_files(wrong, files.image, std::nullopt), Error);
    // Truncated stack.
    fs::resize_file(*files.far, fs::file_size(*files.far) - 1);
    EXPECT_THROW(pipeline::analyze_files(c, std::nullopt, files.far), Error);
    fs::remove_all(c.output_dir);
    fs::remove_all(other.output_dir);
}

TEST(Pipeline, FilesAndMemoryAgree) {
    auto c = small_config("eprcam_agree");
    c.frames.image_plane = 200;
    const auto files = pipeline::simulate_to_files(c, true, false);
    const auto from_disk = pipeline::analyze_files(c, files.image, std::nullopt);
    const auto in_memory = pipeline::run_simulated(c, true, false);
    ASSERT_TRUE(from_disk.image && in_memory.image);
    EXPECT_EQ(from_disk.image->signal, in_memory.image->signal);
    EXPECT_EQ(from_disk.image->reference, in_memory.image->reference);
    EXPECT_EQ(report::to_json(from_disk).dump(), report::to_json(in_memory).dump());
    fs::remove_all(c.output_dir);
}

TEST(Report, TableAndCsv) {
    auto c = small_config("eprcam_report");
    c.frames.image_plane = 300;
    c.frames.far_field = 300;
    const auto run = pipeline::run_simulated(c);
    const json rep = report::to_json(run);
    EXPECT_EQ(rep.at("format"), "eprcam-report");
    EXPECT_EQ(rep.at("config_digest"), config::to_hex(config::digest(c)));
    const std::string table = report::format_table(rep);
    for (const char* row : {"D2min(x1|x2)", "D2min(p2|p1)", "D_pos", "D_mom", "EPR violation"}) {
        EXPECT_NE(table.find(row), std::string::npos) << row;
    }

    std::ostringstream csv;
    report::write_map_csv(rep["image_plane"]["map"], csv);
    const std::string text = csv.str();
    EXPECT_EQ(text.substr(0, text.find('\n')), "u,v,value,masked");
    const auto lines = std::count(text.begin(), text.end(), '\n');
    EXPECT_EQ(lines, 1 + 401 * 401);

    std::ostringstream section;
    report::write_cross_section_csv(rep["image_plane"]["map"], true, 0, section);
    const std::string s = section.str();
    EXPECT_EQ(s.substr(0, s.find('\n')), "u,value,masked");
    EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 1 + 401);
}

TEST(Report, EmptyMapGivesHeaderOnly) {
    json map = {{"mode", "difference"}, {"u_min", 0}, {"v_min", 0}, {"width", 0},
                {"height", 0},          {"masked", json::array()},  {"values", json::array()}};
    std::ostringstream csv;
    report::write_map_csv(map, csv);
    EXPECT_EQ(csv.str(), "u,v,value,masked\n");
}

TEST(Report, MalformedReportRejected) {
    try {
        report::format_table(json{{"format", "something-else"}});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Format);
    }
    EXPECT_THROW(report::format_table(json::array()), Error);
}
