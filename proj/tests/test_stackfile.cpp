#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "eprcam/error.hpp"
#include "eprcam/rng.hpp"
#include "eprcam/stackfile.hpp"

using namespace eprcam;
using namespace eprcam::stackfile;
namespace fs = std::filesystem;

namespace {

fs::path temp(const std::string& name) { return fs::temp_directory_path() / ("eprcam_" + name); }

Header header(Kind kind, int w, int h) {
    Header hd;
    hd.kind = kind;
    hd.plane = PlaneTag::FarField;
    hd.width = w;
    hd.height = h;
    hd.seed = 77;
    for (std::size_t i = 0; i < hd.digest.size(); ++i) hd.digest[i] = static_cast<std::uint8_t>(i * 7);
    return hd;
}

std::vector<emccd::BinaryFrame> frames(int w, int h, int n) {
    std::mt19937_64 gen(1);
    std::bernoulli_distribution bit(0.3);
    std::vector<emccd::BinaryFrame> out;
    for (int i = 0; i < n; ++i) {
        emccd::BinaryFrame f(w, h);
        for (auto& b : f.bits) b = bit(gen);
        out.push_back(f);
    }
    return out;
}

void write_binary(const fs::path& p, const std::vector<emccd::BinaryFrame>& fs, int w, int h) {
    Writer wr(p, header(Kind::Binary, w, h));
    for (const auto& f : fs) wr.write(f);
    wr.close();
}

}  // namespace

TEST(Stackfile, BinaryRoundTripIsBitExact) {
    // Odd width exercises the row padding.
    const int w = 13, h = 5;
    const auto p = temp("binary.bpcm");
    const auto in = frames(w, h, 9);
    write_binary(p, in, w, h);
    EXPECT_EQ(fs::file_size(p), header_size + 9 * 2 * 5);

    Reader r(p);
    EXPECT_EQ(r.header().frame_count, 9u);
    EXPECT_EQ(r.header().seed, 77u);
    EXPECT_EQ(r.header().digest, header(Kind::Binary, w, h).digest);
    emccd::BinaryFrame f;
    std::size_t i = 0;
    while (r.next(f)) EXPECT_EQ(f, in[i++]);
    EXPECT_EQ(i, in.size());
    r.rewind();
    ASSERT_TRUE(r.next(f));
    EXPECT_EQ(f, in[0]);
    fs::remove(p);
}

TEST(Stackfile, RawRoundTripIsBitExact) {
    const auto p = temp("raw.bpcm");
    std::mt19937_64 gen(2);
    std::uniform_int_distribution<int> q(-1000, 2'000'000);
    std::vector<emccd::RawFrame> in;
    for (int i = 0; i < 4; ++i) {
        emccd::RawFrame f(7, 3);
        for (auto& v : f.electrons) v = q(gen) / raw_scale;
        in.push_back(f);
    }
    {
        Writer wr(p, header(Kind::Raw, 7, 3));
        for (const auto& f : in) wr.write(f);
    }
    Reader r(p);
    emccd::RawFrame f;
    for (const auto& expected : in) {
        ASSERT_TRUE(r.next(f));
        EXPECT_EQ(f.electrons, expected.electrons);
    }
    EXPECT_FALSE(r.next(f));
    fs::remove(p);
}

TEST(Stackfile, HeaderLayoutLittleEndian) {
    const auto p = temp("layout.bpcm");
    write_binary(p, frames(8, 2, 3), 8, 2);
    std::ifstream in(p, std::ios::binary);
    std::vector<unsigned char> b(header_size);
    in.read(reinterpret_cast<char*>(b.data()), header_size);
    EXPECT_EQ(std::string(b.begin(), b.begin() + 4), "BPCM");
    EXPECT_EQ(b[4] | (b[5] << 8), 1);
    EXPECT_EQ(b[6], 1);  // binary
    EXPECT_EQ(b[7], 1);  // far field
    EXPECT_EQ(b[8], 8);
    EXPECT_EQ(b[12], 2);
    EXPECT_EQ(b[16], 3);
    EXPECT_EQ(b[24], 77);
    fs::remove(p);
}

TEST(Stackfile, PackingIsLsbFirst) {
    emccd::BinaryFrame f(10, 1);
    f.set(0, 0);
    f.set(9, 0);
    std::vector<std::uint8_t> packed(2);
    pack_binary(f, packed);
    EXPECT_EQ(packed[0], 0x01);
    EXPECT_EQ(packed[1], 0x02);
    emccd::BinaryFrame back(10, 1);
    unpack_binary(packed, back);
    EXPECT_EQ(back, f);
}

TEST(Stackfile, TruncatedFileRejected) {
    const auto p = temp("trunc.bpcm");
    write_binary(p, frames(16, 16, 4), 16, 16);
    fs::resize_file(p, fs::file_size(p) - 5);
    try {
        Reader r(p);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Format);
        EXPECT_NE(std::string(e.what()).find("truncated"), std::string::npos);
    }
    fs::resize_file(p, 10);
    EXPECT_THROW(read_header(p), Error);
    fs::remove(p);
}

TEST(Stackfile, TrailingDataAndBadMagicRejected) {
    const auto p = temp("trail.bpcm");
    write_binary(p, frames(8, 8, 2), 8, 8);
    {
        std::ofstream out(p, std::ios::binary | std::ios::app);
        out.put('x');
    }
    EXPECT_THROW(Reader{p}, Error);
    {
        std::fstream io(p, std::ios::binary | std::ios::in | std::ios::out);
        io.write("XXXX", 4);
    }
    EXPECT_THROW(read_header(p), Error);
    fs::remove(p);
}

TEST(Stackfile, KindAndDimensionMismatches) {
    const auto p = temp("kind.bpcm");
    write_binary(p, frames(8, 8, 1), 8, 8);
    Reader r(p);
    emccd::RawFrame raw;
    EXPECT_THROW(r.next(raw), Error);
    Writer wr(temp("dims.bpcm"), header(Kind::Binary, 8, 8));
    EXPECT_THROW(wr.write(emccd::BinaryFrame(4, 4)), Error);
    EXPECT_THROW(wr.write(emccd::RawFrame(8, 8)), Error);
    wr.close();
    fs::remove(p);
    fs::remove(temp("dims.bpcm"));
    EXPECT_THROW(Reader{temp("does_not_exist.bpcm")}, Error);
}
