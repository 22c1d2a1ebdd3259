#include "eprcam/stackfile.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "eprcam/error.hpp"

namespace eprcam::stackfile {

namespace {

constexpr char magic[4] = {'B', 'P', 'C', 'M'};

template <typename T>
void put_le(std::uint8_t* p, T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) p[i] = static_cast<std::uint8_t>(static_cast<std::uint64_t>(v) >> (8 * i));
}

template <typename T>
T get_le(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return static_cast<T>(v);
}

std::array<std::uint8_t, header_size> encode(const Header& h) {
    std::array<std::uint8_t, header_size> b{};
    std::memcpy(b.data(), magic, 4);
    put_le<std::uint16_t>(b.data() + 4, h.version);
    b[6] = static_cast<std::uint8_t>(h.kind);
    b[7] = static_cast<std::uint8_t>(h.plane);
    put_le<std::uint32_t>(b.data() + 8, h.width);
    put_le<std::uint32_t>(b.data() + 12, h.height);
    put_le<std::uint64_t>(b.data() + 16, h.frame_count);
    put_le<std::uint64_t>(b.data() + 24, h.seed);
    std::copy(h.digest.begin(), h.digest.end(), b.begin() + 32);
    return b;
}

Header decode(const std::uint8_t* b, const std::string& where) {
    require(std::memcmp(b, magic, 4) == 0, ErrorKind::Format, where + ": bad magic, not a BPCM stack");
    Header h;
    h.version = get_le<std::uint16_t>(b + 4);
    require(h.version == format_version, ErrorKind::Format,
            where + ": unsupported version " + std::to_string(h.version));
    require(b[6] <= 1, ErrorKind::Format, where + ": unknown frame kind " + std::to_string(b[6]));
    require(b[7] <= 2, ErrorKind::Format, where + ": unknown plane tag " + std::to_string(b[7]));
    h.kind = static_cast<Kind>(b[6]);
    h.plane = static_cast<PlaneTag>(b[7]);
    h.width = get_le<std::uint32_t>(b + 8);
    h.height = get_le<std::uint32_t>(b + 12);
    h.frame_count = get_le<std::uint64_t>(b + 16);
    h.seed = get_le<std::uint64_t>(b + 24);
    std::copy(b + 32, b + 64, h.digest.begin());
    require(h.width > 0 && h.height > 0, ErrorKind::Format, where + ": zero frame dimensions");
    return h;
}

}  // namespace

std::string_view to_string(Kind k) noexcept { return k == Kind::Raw ? "raw" : "binary"; }

std::string_view to_string(PlaneTag p) noexcept {
    switch (p) {
        case PlaneTag::ImagePlane: return "image";
        case PlaneTag::FarField: return "far_field";
        case PlaneTag::Dark: return "dark";
    }
    return "unknown";
}

PlaneTag tag_for(model::Plane plane) noexcept {
    return plane == model::Plane::ImagePlane ? PlaneTag::ImagePlane : PlaneTag::FarField;
}

std::size_t Header::frame_bytes() const noexcept {
    if (kind == Kind::Binary) return static_cast<std::size_t>((width + 7) / 8) * height;
    return static_cast<std::size_t>(width) * height * 4;
}

void pack_binary(const emccd::BinaryFrame& frame, std::span<std::uint8_t> out) {
    const std::size_t row_bytes = (static_cast<std::size_t>(frame.width) + 7) / 8;
    require(out.size() == row_bytes * frame.height, ErrorKind::DimensionMismatch, "pack buffer size mismatch");
    std::fill(out.begin(), out.end(), 0);
    for (int y = 0; y < frame.height; ++y) {
        std::uint8_t* row = out.data() + row_bytes * y;
        const std::uint8_t* bits = frame.bits.data() + static_cast<std::size_t>(y) * frame.width;
        for (int x = 0; x < frame.width; ++x) {
            if (bits[x]) row[x >> 3] |= static_cast<std::uint8_t>(1u << (x & 7));
        }
    }
}

void unpack_binary(std::span<const std::uint8_t> in, emccd::BinaryFrame& frame) {
    const std::size_t row_bytes = (static_cast<std::size_t>(frame.width) + 7) / 8;
    require(in.size() == row_bytes * frame.height, ErrorKind::DimensionMismatch, "unpack buffer size mismatch");
    frame.bits.resize(static_cast<std::size_t>(frame.width) * frame.height);
    for (int y = 0; y < frame.height; ++y) {
        const std::uint8_t* row = in.data() + row_bytes * y;
        std::uint8_t* bits = frame.bits.data() + static_cast<std::size_t>(y) * frame.width;
        for (int x = 0; x < frame.width; ++x) bits[x] = (row[x >> 3] >> (x & 7)) & 1u;
    }
}

// ---------------------------------------------------------------------------

Writer::Writer(const std::filesystem::path& path, Header header)
    : path_(path), header_(header), out_(path, std::ios::binary | std::ios::trunc) {
    require(out_.good(), ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
    require(header_.width > 0 && header_.height > 0, ErrorKind::InvalidParameter,
            "stack header needs positive dimensions");
    header_.frame_count = 0;
    const auto h = encode(header_);
    out_.write(reinterpret_cast<const char*>(h.data()), h.size());
    buffer_.resize(header_.frame_bytes());
    require(out_.good(), ErrorKind::Io, "failed writing header to '" + path.string() + "'");
}

Writer::~Writer() {
    if (!closed_) {
        try {
            close();
        } catch (...) {
        }
    }
}

void Writer::check_dims(int width, int height) const {
    require(static_cast<std::uint32_t>(width) == header_.width &&
                static_cast<std::uint32_t>(height) == header_.height,
            ErrorKind::DimensionMismatch, "frame dimensions do not match stack header of '" + path_.string() + "'");
    require(!closed_, ErrorKind::Io, "write to closed stack '" + path_.string() + "'");
}

void Writer::write(const emccd::BinaryFrame& frame) {
    require(header_.kind == Kind::Binary, ErrorKind::Format, "cannot write a binary frame to a raw stack");
    check_dims(frame.width, frame.height);
    pack_binary(frame, buffer_);
    out_.write(reinterpret_cast<const char*>(buffer_.data()), static_cast<std::streamsize>(buffer_.size()));
    require(out_.good(), ErrorKind::Io, "failed writing frame to '" + path_.string() + "'");
    ++written_;
}

void Writer::write(const emccd::RawFrame& frame) {
    require(header_.kind == Kind::Raw, ErrorKind::Format, "cannot write a raw frame to a binary stack");
    check_dims(frame.width, frame.height);
    std::uint8_t* p = buffer_.data();
    for (double e : frame.electrons) {
        const double scaled = std::round(e * raw_scale);
        require(std::abs(scaled) <= static_cast<double>(std::numeric_limits<std::int32_t>::max()),
                ErrorKind::InvalidParameter, "electron count exceeds the fixed-point range");
        put_le<std::uint32_t>(p, static_cast<std::uint32_t>(static_cast<std::int32_t>(scaled)));
        p += 4;
    }
    out_.write(reinterpret_cast<const char*>(buffer_.data()), static_cast<std::streamsize>(buffer_.size()));
    require(out_.good(), ErrorKind::Io, "failed writing frame to '" + path_.string() + "'");
    ++written_;
}

void Writer::close() {
    if (closed_) return;
    closed_ = true;
    header_.frame_count = written_;
    const auto h = encode(header_);
    out_.seekp(0);
    out_.write(reinterpret_cast<const char*>(h.data()), h.size());
    out_.close();
    require(!out_.fail(), ErrorKind::Io, "failed finalising '" + path_.string() + "'");
}

// ---------------------------------------------------------------------------

Header read_header(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), ErrorKind::Io, "cannot open stack '" + path.string() + "'");
    std::array<std::uint8_t, header_size> b{};
    in.read(reinterpret_cast<char*>(b.data()), b.size());
    require(in.gcount() == static_cast<std::streamsize>(b.size()), ErrorKind::Format,
            path.string() + ": truncated header");
    return decode(b.data(), path.string());
}

Reader::Reader(const std::filesystem::path& path)
    : path_(path), header_(read_header(path)), in_(path, std::ios::binary) {
    require(in_.good(), ErrorKind::Io, "cannot open stack '" + path.string() + "'");
    const auto size = std::filesystem::file_size(path);
    const auto expected = header_size + header_.frame_count * header_.frame_bytes();
    require(size == expected, ErrorKind::Format,
            path.string() + ": payload is " + std::to_string(size - header_size) + " bytes, header implies " +
                std::to_string(expected - header_size) + (size < expected ? " (truncated)" : " (trailing data)"));
    buffer_.resize(header_.frame_bytes());
    in_.seekg(header_size);
}

bool Reader::read_payload() {
    if (position_ >= header_.frame_count) return false;
    in_.read(reinterpret_cast<char*>(buffer_.data()), static_cast<std::streamsize>(buffer_.size()));
    require(in_.gcount() == static_cast<std::streamsize>(buffer_.size()), ErrorKind::Format,
            path_.string() + ": truncated at frame " + std::to_string(position_));
    ++position_;
    return true;
}

bool Reader::next(emccd::BinaryFrame& frame) {
    require(header_.kind == Kind::Binary, ErrorKind::Format, path_.string() + " holds raw frames, not binary");
    if (!read_payload()) return false;
    frame.width = static_cast<int>(header_.width);
    frame.height = static_cast<int>(header_.height);
    unpack_binary(buffer_, frame);
    return true;
}

bool Reader::next(emccd::RawFrame& frame) {
    require(header_.kind == Kind::Raw, ErrorKind::Format, path_.string() + " holds binary frames, not raw");
    if (!read_payload()) return false;
    frame.width = static_cast<int>(header_.width);
    frame.height = static_cast<int>(header_.height);
    frame.electrons.resize(static_cast<std::size_t>(frame.width) * frame.height);
    const std::uint8_t* p = buffer_.data();
    for (auto& e : frame.electrons) {
        e = static_cast<double>(static_cast<std::int32_t>(get_le<std::uint32_t>(p))) / raw_scale;
        p += 4;
    }
    return true;
}

void Reader::rewind() {
    in_.clear();
    in_.seekg(header_size);
    position_ = 0;
}

}  // namespace eprcam::stackfile
