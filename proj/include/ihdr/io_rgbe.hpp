#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "ihdr/errors.hpp"
#include "ihdr/image.hpp"

// Radiance picture format with shared-exponent RGBE pixels. A pixel decodes
// as (m/256) * 2^(e-128) per channel, exponent byte 0 meaning black. Both
// new-style RLE and flat scanlines are accepted on read; writing is always
// flat. The encoder rounds mantissas to nearest, carrying into the exponent
// when the dominant channel rounds up to 256, which keeps the per-channel
// roundtrip error within 1/256 of the pixel's decoded maximum.

namespace ihdr {

namespace rgbe_detail {

inline std::array<std::uint8_t, 4> encode_pixel(double r, double g, double b) {
    const double v = std::max({r, g, b});
    if (!(v >= 1e-38)) return {0, 0, 0, 0};
    int e = 0;
    std::frexp(v, &e); // v = f * 2^e, f in [0.5, 1)
    if (e + 128 < 1) return {0, 0, 0, 0};
    if (e > 127) { // saturate far outside any practical range
        e = 127;
        r = std::min(r, 255.0 / 256.0 * std::ldexp(1.0, 127));
        g = std::min(g, 255.0 / 256.0 * std::ldexp(1.0, 127));
        b = std::min(b, 255.0 / 256.0 * std::ldexp(1.0, 127));
    }
    double scale = std::ldexp(1.0, 8 - e); // 256 / 2^e
    long mr = std::lround(r * scale);
    long mg = std::lround(g * scale);
    long mb = std::lround(b * scale);
    if (mr > 255 || mg > 255 || mb > 255) {
        ++e;
        scale *= 0.5;
        mr = std::lround(r * scale);
        mg = std::lround(g * scale);
        mb = std::lround(b * scale);
    }
    return {static_cast<std::uint8_t>(mr), static_cast<std::uint8_t>(mg),
            static_cast<std::uint8_t>(mb), static_cast<std::uint8_t>(e + 128)};
}

inline void decode_pixel(const std::uint8_t rgbe[4], double out[3]) {
    if (rgbe[3] == 0) {
        out[0] = out[1] = out[2] = 0.0;
        return;
    }
    const double f = std::ldexp(1.0, static_cast<int>(rgbe[3]) - 136); // 2^(e-128) / 256
    out[0] = rgbe[0] * f;
    out[1] = rgbe[1] * f;
    out[2] = rgbe[2] * f;
}

inline std::string read_line(const std::string& bytes, std::size_t& pos) {
    const std::size_t start = pos;
    while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    if (pos >= bytes.size())
        throw ParseError("hdr: unterminated header line", static_cast<long long>(start));
    std::string line = bytes.substr(start, pos - start);
    ++pos;
    return line;
}

} // namespace rgbe_detail

inline void write_rgbe(const std::filesystem::path& path, const Image& img) {
    if (img.channels() != 3) throw InvalidArgument("hdr: expected a 3-channel image");
    require_nonnegative(img, "hdr image");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ParseError("hdr: cannot open '" + path.string() + "' for writing");
    os << "#?RADIANCE\n"
       << "FORMAT=32-bit_rle_rgbe\n"
       << "\n"
       << "-Y " << img.height() << " +X " << img.width() << "\n";
    std::vector<std::uint8_t> row(static_cast<std::size_t>(img.width()) * 4);
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            const auto px = rgbe_detail::encode_pixel(img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2));
            std::copy(px.begin(), px.end(), row.begin() + static_cast<std::size_t>(x) * 4);
        }
        os.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!os) throw ParseError("hdr: write failed for '" + path.string() + "'");
}

inline Image read_rgbe(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ParseError("hdr: cannot open '" + path.string() + "'");
    const std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    std::size_t pos = 0;

    const std::string signature = rgbe_detail::read_line(bytes, pos);
    if (signature.rfind("#?RADIANCE", 0) != 0)
        throw ParseError("hdr: missing #?RADIANCE signature", 0);

    bool format_ok = false;
    for (;;) {
        const long long line_off = static_cast<long long>(pos);
        const std::string line = rgbe_detail::read_line(bytes, pos);
        if (line.empty()) break; // blank line ends the header
        if (line.rfind("FORMAT=", 0) == 0) {
            if (line != "FORMAT=32-bit_rle_rgbe")
                throw ParseError("hdr: unsupported FORMAT '" + line + "'", line_off);
            format_ok = true;
        }
        // other header variables (EXPOSURE, comments) are ignored
    }
    if (!format_ok) throw ParseError("hdr: no FORMAT specifier", static_cast<long long>(pos));

    const long long res_off = static_cast<long long>(pos);
    const std::string res = rgbe_detail::read_line(bytes, pos);
    int width = 0, height = 0;
    if (std::sscanf(res.c_str(), "-Y %d +X %d", &height, &width) != 2 || width <= 0 || height <= 0)
        throw ParseError("hdr: bad resolution line '" + res + "'", res_off);

    Image img(height, width, 3);
    std::vector<std::uint8_t> scanline(static_cast<std::size_t>(width) * 4);
    for (int y = 0; y < height; ++y) {
        if (bytes.size() - pos < 4)
            throw ParseError("hdr: truncated scanline", static_cast<long long>(pos));
        const auto* head = reinterpret_cast<const std::uint8_t*>(bytes.data() + pos);
        const bool rle = head[0] == 2 && head[1] == 2 &&
                         ((static_cast<int>(head[2]) << 8) | head[3]) == width;
        if (rle) {
            pos += 4;
            for (int comp = 0; comp < 4; ++comp) {
                int x = 0;
                while (x < width) {
                    if (pos >= bytes.size())
                        throw ParseError("hdr: truncated RLE data", static_cast<long long>(pos));
                    const int count = static_cast<std::uint8_t>(bytes[pos++]);
                    if (count > 128) { // run
                        const int run = count - 128;
                        if (x + run > width)
                            throw ParseError("hdr: RLE run overflow", static_cast<long long>(pos));
                        if (pos >= bytes.size())
                            throw ParseError("hdr: truncated RLE run", static_cast<long long>(pos));
                        const std::uint8_t v = static_cast<std::uint8_t>(bytes[pos++]);
                        for (int i = 0; i < run; ++i) scanline[(x + i) * 4 + comp] = v;
                        x += run;
                    } else { // literals
                        if (count == 0)
                            throw ParseError("hdr: zero-length RLE packet", static_cast<long long>(pos));
                        if (x + count > width)
                            throw ParseError("hdr: RLE literal overflow", static_cast<long long>(pos));
                        if (bytes.size() - pos < static_cast<std::size_t>(count))
                            throw ParseError("hdr: truncated RLE literals", static_cast<long long>(pos));
                        for (int i = 0; i < count; ++i)
                            scanline[(x + i) * 4 + comp] = static_cast<std::uint8_t>(bytes[pos++]);
                        x += count;
                    }
                }
            }
        } else {
            if (bytes.size() - pos < scanline.size())
                throw ParseError("hdr: truncated flat scanline", static_cast<long long>(pos));
            std::memcpy(scanline.data(), bytes.data() + pos, scanline.size());
            pos += scanline.size();
        }
        for (int x = 0; x < width; ++x) {
            double px[3];
            rgbe_detail::decode_pixel(&scanline[static_cast<std::size_t>(x) * 4], px);
            img.at(y, x, 0) = px[0];
            img.at(y, x, 1) = px[1];
            img.at(y, x, 2) = px[2];
        }
    }
    return img;
}

} // namespace ihdr
