#include <filesystem>
#include <fstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "eprcam/config.hpp"
#include "eprcam/error.hpp"
#include "eprcam/units.hpp"

using namespace eprcam;
using nlohmann::json;

namespace {

std::string schema_message(const json& j) {
    try {
        config::from_json(j);
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Schema);
        return e.what();
    }
    ADD_FAILURE() << "expected a schema error";
    return {};
}

}  // namespace

TEST(Config, DefaultsMatchPhysicalValues) {
    config::RunConfig c;
    EXPECT_DOUBLE_EQ(c.source.pump_wavelength_nm, 355.0);
    EXPECT_DOUBLE_EQ(c.source.pump_waist_um, 660.0);
    EXPECT_DOUBLE_EQ(c.source.crystal_length_mm, 5.0);
    EXPECT_DOUBLE_EQ(c.optics.magnification, 2.5);
    EXPECT_DOUBLE_EQ(c.optics.effective_focal_mm, 100.0);
    EXPECT_DOUBLE_EQ(c.camera.pixel_pitch_um, 16.0);
    EXPECT_EQ(c.camera.width, 201);
    EXPECT_EQ(c.camera.height, 201);
    EXPECT_DOUBLE_EQ(c.flux.photons_per_pixel, 0.02);
    EXPECT_NO_THROW(c.validate());
}

TEST(Config, RoundTrip) {
    config::RunConfig c;
    c.seed = 99;
    c.threshold_k = 2.25;
    c.camera.smear_prob = 0.1;
    c.flux.attenuation = sampler::Attenuation::AfterCrystal;
    c.flux.transmission = 0.025;
    c.masks.smear_rows = true;
    const auto back = config::from_json(config::to_json(c));
    EXPECT_EQ(config::to_json(back), config::to_json(c));
    EXPECT_EQ(back.seed, 99u);
    ASSERT_TRUE(back.threshold_k);
    EXPECT_DOUBLE_EQ(*back.threshold_k, 2.25);
    EXPECT_EQ(back.flux.attenuation, sampler::Attenuation::AfterCrystal);
}

TEST(Config, MissingFieldNamed) {
    auto j = config::to_json(config::RunConfig{});
    j["camera"].erase("qe");
    EXPECT_NE(schema_message(j).find("camera.qe"), std::string::npos);
    auto k = config::to_json(config::RunConfig{});
    k.erase("frames");
    EXPECT_NE(schema_message(k).find("frames"), std::string::npos);
}

TEST(Config, UnknownKeyRejected) {
    auto j = config::to_json(config::RunConfig{});
    j["optics"]["image_plane"]["zoom"] = 3;
    EXPECT_NE(schema_message(j).find("zoom"), std::string::npos);
}

TEST(Config, LengthsNeedUnits) {
    auto j = config::to_json(config::RunConfig{});
    j["source"]["pump_waist"] = 660;
    EXPECT_NE(schema_message(j).find("source.pump_waist"), std::string::npos);
    j["source"]["pump_waist"] = "0.66 mm";
    EXPECT_DOUBLE_EQ(config::from_json(j).source.pump_waist_um, 660.0);
    EXPECT_THROW(units::parse_length_um("5 parsecs"), Error);
    EXPECT_DOUBLE_EQ(units::parse_length_um("355 nm"), 0.355);
}

TEST(Config, InvalidValuesRejected) {
    auto j = config::to_json(config::RunConfig{});
    j["camera"]["qe"] = 1.5;
    EXPECT_THROW(config::from_json(j), Error);
    j = config::to_json(config::RunConfig{});
    j["camera"]["gain_model"] = "linear";
    EXPECT_THROW(config::from_json(j), Error);
    j = config::to_json(config::RunConfig{});
    j["seed"] = -4;
    EXPECT_THROW(config::from_json(j), Error);
}

TEST(Config, DigestIgnoresOutputOnly) {
    config::RunConfig a, b;
    b.output_dir = "elsewhere";
    EXPECT_EQ(config::digest(a), config::digest(b));
    b.seed = 2;
    EXPECT_NE(config::digest(a), config::digest(b));
    EXPECT_EQ(config::to_hex(config::digest(a)).size(), 64u);
}

TEST(Config, SaveAndLoad) {
    const auto path = std::filesystem::temp_directory_path() / "eprcam_config_test.json";
    config::RunConfig c;
    c.frames.dark = 17;
    config::save(c, path);
    EXPECT_EQ(config::load(path).frames.dark, 17u);
    std::filesystem::remove(path);
    EXPECT_THROW(config::load(path), Error);
}

TEST(Config, ShippedDefaultMatchesBuiltIn) {
    const auto path = std::filesystem::path(EPRCAM_SOURCE_DIR) / "configs" / "default.json";
    EXPECT_EQ(config::to_json(config::load(path)), config::to_json(config::RunConfig{}));
}
