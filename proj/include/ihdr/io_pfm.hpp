#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "ihdr/errors.hpp"
#include "ihdr/image.hpp"

// Portable float map. Header: "PF" (color) or "Pf" (gray), width and height,
// then a scale whose sign encodes endianness (negative = little-endian).
// Pixel rows are stored bottom-up, 32-bit floats. We always write "-1.0";
// the scale magnitude is ignored on read, as is common practice.

namespace ihdr {

namespace pfm_detail {

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ParseError("pfm: cannot open '" + path.string() + "'");
    std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return bytes;
}

inline void skip_ws(const std::string& s, std::size_t& pos) {
    while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t' || s[pos] == '\n' || s[pos] == '\r'))
        ++pos;
}

inline std::string next_token(const std::string& s, std::size_t& pos, const char* what) {
    skip_ws(s, pos);
    const std::size_t start = pos;
    while (pos < s.size() && !(s[pos] == ' ' || s[pos] == '\t' || s[pos] == '\n' || s[pos] == '\r'))
        ++pos;
    if (start == pos)
        throw ParseError(std::string("pfm: missing ") + what, static_cast<long long>(start));
    return s.substr(start, pos - start);
}

inline float swap_f32(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    bits = ((bits & 0x000000ffu) << 24) | ((bits & 0x0000ff00u) << 8) |
           ((bits & 0x00ff0000u) >> 8) | ((bits & 0xff000000u) >> 24);
    std::memcpy(&v, &bits, 4);
    return v;
}

} // namespace pfm_detail

inline void write_pfm(const std::filesystem::path& path, const Image& img) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ParseError("pfm: cannot open '" + path.string() + "' for writing");
    os << (img.channels() == 3 ? "PF" : "Pf") << '\n'
       << img.width() << ' ' << img.height() << '\n'
       << "-1.0" << '\n';
    std::vector<float> row(static_cast<std::size_t>(img.width()) * img.channels());
    for (int y = img.height() - 1; y >= 0; --y) {
        std::size_t i = 0;
        for (int x = 0; x < img.width(); ++x)
            for (int c = 0; c < img.channels(); ++c) row[i++] = static_cast<float>(img.at(y, x, c));
        os.write(reinterpret_cast<const char*>(row.data()),
                 static_cast<std::streamsize>(row.size() * 4));
    }
    if (!os) throw ParseError("pfm: write failed for '" + path.string() + "'");
}

inline Image read_pfm(const std::filesystem::path& path) {
    const std::string bytes = pfm_detail::read_file(path);
    std::size_t pos = 0;

    const std::string magic = pfm_detail::next_token(bytes, pos, "magic");
    int channels;
    if (magic == "PF")
        channels = 3;
    else if (magic == "Pf")
        channels = 1;
    else
        throw ParseError("pfm: bad magic '" + magic + "'", 0);

    const std::string wtok = pfm_detail::next_token(bytes, pos, "width");
    const std::string htok = pfm_detail::next_token(bytes, pos, "height");
    const std::string stok = pfm_detail::next_token(bytes, pos, "scale");
    int width = 0, height = 0;
    double scale = 0.0;
    try {
        width = std::stoi(wtok);
        height = std::stoi(htok);
        scale = std::stod(stok);
    } catch (const std::exception&) {
        throw ParseError("pfm: malformed header field", static_cast<long long>(pos));
    }
    if (width <= 0 || height <= 0)
        throw ParseError("pfm: non-positive dimensions", static_cast<long long>(pos));
    if (scale == 0.0) throw ParseError("pfm: zero scale field", static_cast<long long>(pos));
    const bool file_little_endian = scale < 0.0;

    // Exactly one whitespace byte separates the header from the payload.
    if (pos >= bytes.size() ||
        !(bytes[pos] == '\n' || bytes[pos] == ' ' || bytes[pos] == '\t' || bytes[pos] == '\r'))
        throw ParseError("pfm: missing header terminator", static_cast<long long>(pos));
    ++pos;

    const std::size_t count = static_cast<std::size_t>(width) * height * channels;
    if (bytes.size() - pos < count * 4)
        throw ParseError("pfm: truncated payload", static_cast<long long>(bytes.size()));

    static_assert(std::endian::native == std::endian::little ||
                  std::endian::native == std::endian::big);
    const bool need_swap = file_little_endian != (std::endian::native == std::endian::little);

    Image img(height, width, channels);
    for (int y = height - 1; y >= 0; --y)
        for (int x = 0; x < width; ++x)
            for (int c = 0; c < channels; ++c) {
                float v;
                std::memcpy(&v, bytes.data() + pos, 4);
                pos += 4;
                if (need_swap) v = pfm_detail::swap_f32(v);
                if (!std::isfinite(v))
                    throw ParseError("pfm: non-finite sample", static_cast<long long>(pos - 4));
                img.at(y, x, c) = static_cast<double>(v);
            }
    return img;
}

} // namespace ihdr
