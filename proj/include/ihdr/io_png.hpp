#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <zlib.h>

#include "ihdr/errors.hpp"
#include "ihdr/image.hpp"

// Minimal PNG codec over zlib for 8-bit images. Writes truecolor RGB with
// filter type 0 on every scanline. Reads 8-bit grayscale or RGB, no palette,
// no alpha, no interlacing; grayscale is promoted to three identical
// channels. Chunk CRCs are verified.

namespace ihdr {

namespace png_detail {

inline constexpr std::uint8_t kSignature[8] = {137, 80, 78, 71, 13, 10, 26, 10};

inline void put_u32be(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
}

inline std::uint32_t get_u32be(const std::uint8_t* p) {
    return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
           (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

inline void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                         const std::vector<std::uint8_t>& payload) {
    put_u32be(out, static_cast<std::uint32_t>(payload.size()));
    const std::size_t crc_start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), payload.begin(), payload.end());
    const auto crc = static_cast<std::uint32_t>(
        crc32(0, out.data() + crc_start, static_cast<uInt>(out.size() - crc_start)));
    put_u32be(out, crc);
}

inline int paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

} // namespace png_detail

inline void write_png(const std::filesystem::path& path, const LdrImage& img) {
    if (img.bit_depth != 8)
        throw InvalidArgument("png: only 8-bit images can be written");
    img.validate();

    std::vector<std::uint8_t> ihdr;
    png_detail::put_u32be(ihdr, static_cast<std::uint32_t>(img.width));
    png_detail::put_u32be(ihdr, static_cast<std::uint32_t>(img.height));
    ihdr.push_back(8); // bit depth
    ihdr.push_back(2); // truecolor
    ihdr.push_back(0); // compression
    ihdr.push_back(0); // filter method
    ihdr.push_back(0); // no interlace

    // Raw scanlines, each with a leading zero filter byte.
    const std::size_t stride = static_cast<std::size_t>(img.width) * 3;
    std::vector<std::uint8_t> raw((stride + 1) * static_cast<std::size_t>(img.height));
    std::size_t i = 0;
    for (int y = 0; y < img.height; ++y) {
        raw[i++] = 0;
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) raw[i++] = static_cast<std::uint8_t>(img.at(y, x, c));
    }

    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> compressed(bound);
    if (compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()),
                  Z_DEFAULT_COMPRESSION) != Z_OK)
        throw NumericalError("png: deflate failed");
    compressed.resize(bound);

    std::vector<std::uint8_t> out(png_detail::kSignature, png_detail::kSignature + 8);
    png_detail::append_chunk(out, "IHDR", ihdr);
    png_detail::append_chunk(out, "IDAT", compressed);
    png_detail::append_chunk(out, "IEND", {});

    std::ofstream os(path, std::ios::binary);
    if (!os) throw ParseError("png: cannot open '" + path.string() + "' for writing");
    os.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!os) throw ParseError("png: write failed for '" + path.string() + "'");
}

inline LdrImage read_png(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ParseError("png: cannot open '" + path.string() + "'");
    const std::string str((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    const auto* bytes = reinterpret_cast<const std::uint8_t*>(str.data());
    const std::size_t size = str.size();

    if (size < 8 || std::memcmp(bytes, png_detail::kSignature, 8) != 0)
        throw ParseError("png: bad signature", 0);

    std::size_t pos = 8;
    bool have_ihdr = false;
    int width = 0, height = 0, color_type = 0;
    std::vector<std::uint8_t> idat;
    bool done = false;
    while (!done) {
        if (size - pos < 12) throw ParseError("png: truncated chunk", static_cast<long long>(pos));
        const std::uint32_t length = png_detail::get_u32be(bytes + pos);
        if (size - pos < 12 + static_cast<std::size_t>(length))
            throw ParseError("png: truncated chunk payload", static_cast<long long>(pos));
        char type[5] = {};
        std::memcpy(type, bytes + pos + 4, 4);
        const std::uint8_t* payload = bytes + pos + 8;
        const std::uint32_t expect_crc = png_detail::get_u32be(payload + length);
        const auto crc = static_cast<std::uint32_t>(
            crc32(0, bytes + pos + 4, static_cast<uInt>(length + 4)));
        if (crc != expect_crc)
            throw ParseError("png: chunk CRC mismatch", static_cast<long long>(pos));

        const std::string t(type);
        if (t == "IHDR") {
            if (length != 13) throw ParseError("png: bad IHDR length", static_cast<long long>(pos));
            width = static_cast<int>(png_detail::get_u32be(payload));
            height = static_cast<int>(png_detail::get_u32be(payload + 4));
            const int bit_depth = payload[8];
            color_type = payload[9];
            if (bit_depth != 8)
                throw ParseError("png: only 8-bit images are supported",
                                 static_cast<long long>(pos));
            if (color_type != 0 && color_type != 2)
                throw ParseError("png: unsupported color type " + std::to_string(color_type),
                                 static_cast<long long>(pos));
            if (payload[12] != 0)
                throw ParseError("png: interlaced images are not supported",
                                 static_cast<long long>(pos));
            have_ihdr = true;
        } else if (t == "IDAT") {
            idat.insert(idat.end(), payload, payload + length);
        } else if (t == "IEND") {
            done = true;
        }
        // ancillary chunks are skipped
        pos += 12 + length;
    }
    if (!have_ihdr || width <= 0 || height <= 0)
        throw ParseError("png: missing or invalid IHDR", 8);
    if (idat.empty()) throw ParseError("png: no image data", static_cast<long long>(pos));

    const int src_channels = color_type == 2 ? 3 : 1;
    const std::size_t stride = static_cast<std::size_t>(width) * src_channels;
    std::vector<std::uint8_t> raw((stride + 1) * static_cast<std::size_t>(height));
    uLongf raw_size = static_cast<uLongf>(raw.size());
    const int zrc = uncompress(raw.data(), &raw_size, idat.data(), static_cast<uLong>(idat.size()));
    if (zrc != Z_OK || raw_size != raw.size())
        throw ParseError("png: inflate failed or size mismatch", static_cast<long long>(pos));

    // Undo scanline filters in place.
    const int bpp = src_channels;
    std::vector<std::uint8_t> prev(stride, 0);
    LdrImage img(height, width, 8);
    for (int y = 0; y < height; ++y) {
        const std::size_t row_off = static_cast<std::size_t>(y) * (stride + 1);
        const int filter = raw[row_off];
        std::uint8_t* row = raw.data() + row_off + 1;
        for (std::size_t x = 0; x < stride; ++x) {
            const int a = x >= static_cast<std::size_t>(bpp) ? row[x - bpp] : 0;
            const int b = prev[x];
            const int c = x >= static_cast<std::size_t>(bpp) ? prev[x - bpp] : 0;
            int v = row[x];
            switch (filter) {
            case 0: break;
            case 1: v += a; break;
            case 2: v += b; break;
            case 3: v += (a + b) / 2; break;
            case 4: v += png_detail::paeth(a, b, c); break;
            default:
                throw ParseError("png: unknown filter type " + std::to_string(filter),
                                 static_cast<long long>(row_off));
            }
            row[x] = static_cast<std::uint8_t>(v & 0xff);
        }
        std::memcpy(prev.data(), row, stride);
        for (int x = 0; x < width; ++x)
            for (int ch = 0; ch < 3; ++ch)
                img.at(y, x, ch) = row[static_cast<std::size_t>(x) * src_channels +
                                       (src_channels == 3 ? ch : 0)];
    }
    return img;
}

} // namespace ihdr
