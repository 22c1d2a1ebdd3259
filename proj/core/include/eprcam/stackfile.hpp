#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <vector>

#include "eprcam/config.hpp"
#include "eprcam/emccd.hpp"

// Frame-stack container, little-endian throughout.
//
//   offset size field
//   0      4    magic "BPCM"
//   4      2    version (1)
//   6      1    kind: 0 raw, 1 binary
//   7      1    plane: 0 image, 1 far field, 2 dark
//   8      4    width
//   12     4    height
//   16     8    frame count
//   24     8    master seed
//   32     32   SHA-256 config digest
//   64          payload
//
// Binary frames are stored row by row, each row bit-packed LSB-first and
// padded to a whole byte. Raw frames are int32 electrons in units of 1/256 e-.
namespace eprcam::stackfile {

enum class Kind : std::uint8_t { Raw = 0, Binary = 1 };
enum class PlaneTag : std::uint8_t { ImagePlane = 0, FarField = 1, Dark = 2 };

std::string_view to_string(Kind k) noexcept;
std::string_view to_string(PlaneTag p) noexcept;
PlaneTag tag_for(model::Plane plane) noexcept;

inline constexpr std::size_t header_size = 64;
inline constexpr std::uint16_t format_version = 1;
inline constexpr double raw_scale = 256.0;

struct Header {
    std::uint16_t version = format_version;
    Kind kind = Kind::Binary;
    PlaneTag plane = PlaneTag::ImagePlane;
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::uint64_t frame_count = 0;
    std::uint64_t seed = 0;
    config::Digest digest{};

    std::size_t frame_bytes() const noexcept;
    friend bool operator==(const Header&, const Header&) = default;
};

/// Sequential writer. The frame count is patched into the header on close.
class Writer {
public:
    Writer(const std::filesystem::path& path, Header header);
    ~Writer();
    Writer(const Writer&) = delete;
    Writer& operator=(const Writer&) = delete;

    void write(const emccd::BinaryFrame& frame);
    void write(const emccd::RawFrame& frame);
    void close();

    std::uint64_t frames_written() const noexcept { return written_; }

private:
    void check_dims(int width, int height) const;

    std::filesystem::path path_;
    Header header_;
    std::ofstream out_;
    std::vector<std::uint8_t> buffer_;
    std::uint64_t written_ = 0;
    bool closed_ = false;
};

/// Sequential reader; the constructor validates the header and that the file
/// holds exactly the payload the header implies.
class Reader {
public:
    explicit Reader(const std::filesystem::path& path);

    const Header& header() const noexcept { return header_; }
    const std::filesystem::path& path() const noexcept { return path_; }

    /// False once every frame has been read.
    bool next(emccd::BinaryFrame& frame);
    bool next(emccd::RawFrame& frame);
    void rewind();

    std::uint64_t position() const noexcept { return position_; }

private:
    bool read_payload();

    std::filesystem::path path_;
    Header header_;
    std::ifstream in_;
    std::vector<std::uint8_t> buffer_;
    std::uint64_t position_ = 0;
};

Header read_header(const std::filesystem::path& path);

void pack_binary(const emccd::BinaryFrame& frame, std::span<std::uint8_t> out);
void unpack_binary(std::span<const std::uint8_t> in, emccd::BinaryFrame& frame);

}  // namespace eprcam::stackfile
