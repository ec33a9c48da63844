#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "ihdr/errors.hpp"

namespace ihdr {

// Row-major, channel-interleaved raster of double-precision values.
//
// Linear radiometric images (relative scene luminance) are nonnegative by
// contract, but the same container also carries signed data such as spatial
// gradients, so only finiteness and layout are enforced here. Callers that
// need nonnegativity use require_nonnegative().
class Image {
public:
    Image(int height, int width, int channels, double fill = 0.0)
        : height_(height), width_(width), channels_(channels) {
        check_dims(height, width, channels);
        data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
        if (!std::isfinite(fill)) throw InvalidArgument("image: non-finite fill value");
    }

    static Image from_data(int height, int width, int channels, std::vector<double> data) {
        check_dims(height, width, channels);
        if (data.size() != static_cast<std::size_t>(height) * width * channels)
            throw InvalidArgument("image: data length does not match dimensions");
        for (double v : data)
            if (!std::isfinite(v)) throw InvalidArgument("image: non-finite pixel value");
        Image img(height, width, channels);
        img.data_ = std::move(data);
        return img;
    }

    int height() const { return height_; }
    int width() const { return width_; }
    int channels() const { return channels_; }
    std::size_t size() const { return data_.size(); }

    double& at(int y, int x, int c) {
        return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }
    double at(int y, int x, int c) const {
        return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }

    bool same_dims(const Image& o) const {
        return height_ == o.height_ && width_ == o.width_ && channels_ == o.channels_;
    }

private:
    static void check_dims(int height, int width, int channels) {
        if (height <= 0 || width <= 0)
            throw InvalidArgument("image: dimensions must be positive");
        if (channels != 1 && channels != 3)
            throw InvalidArgument("image: channel count must be 1 or 3");
    }

    int height_;
    int width_;
    int channels_;
    std::vector<double> data_;
};

inline void require_nonnegative(const Image& img, const char* what) {
    for (double v : img.data())
        if (v < 0.0) throw InvalidArgument(std::string(what) + ": negative value");
}

// Quantized image: integer codes in [0, 2^bit_depth - 1], three channels.
struct LdrImage {
    LdrImage(int height, int width, int bit_depth = 8)
        : height(height), width(width), bit_depth(bit_depth) {
        if (height <= 0 || width <= 0)
            throw InvalidArgument("ldr image: dimensions must be positive");
        if (bit_depth < 1 || bit_depth > 16)
            throw InvalidArgument("ldr image: bit depth must be in [1, 16]");
        data.assign(static_cast<std::size_t>(height) * width * 3, 0);
    }

    std::uint16_t max_code() const {
        return static_cast<std::uint16_t>((1u << bit_depth) - 1u);
    }

    std::uint16_t& at(int y, int x, int c) {
        return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
    std::uint16_t at(int y, int x, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }

    void validate() const {
        const std::uint16_t cap = max_code();
        for (std::uint16_t v : data)
            if (v > cap) throw InvalidArgument("ldr image: code exceeds bit depth");
    }

    int height;
    int width;
    int bit_depth;
    std::vector<std::uint16_t> data; // row-major RGB
};

// Nearest-rank percentile: sort ascending, take the element at
// ceil(p/100 * n) - 1, clamped to the valid index range.
inline double percentile(std::span<const double> values, double p) {
    if (values.empty()) throw InvalidArgument("empty sample");
    if (!(p >= 0.0 && p <= 100.0))
        throw InvalidArgument("percentile: p must be in [0, 100]");
    std::vector<double> sorted(values.begin(), values.end());
    for (double v : sorted)
        if (!std::isfinite(v)) throw InvalidArgument("percentile: non-finite sample");
    std::sort(sorted.begin(), sorted.end());
    const auto n = static_cast<long long>(sorted.size());
    long long idx = static_cast<long long>(std::ceil(p / 100.0 * static_cast<double>(n))) - 1;
    idx = std::clamp(idx, 0ll, n - 1);
    return sorted[static_cast<std::size_t>(idx)];
}

// 2x2 block mean; odd trailing row/column dropped.
inline Image downsample_half(const Image& img) {
    if (img.height() < 2 || img.width() < 2) throw InvalidArgument("image too small");
    const int oh = img.height() / 2;
    const int ow = img.width() / 2;
    Image out(oh, ow, img.channels());
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x)
            for (int c = 0; c < img.channels(); ++c)
                out.at(y, x, c) = 0.25 * (img.at(2 * y, 2 * x, c) + img.at(2 * y, 2 * x + 1, c) +
                                          img.at(2 * y + 1, 2 * x, c) + img.at(2 * y + 1, 2 * x + 1, c));
    return out;
}

// Forward differences. gx holds img[y][x+1] - img[y][x] with a zero last
// column, gy holds img[y+1][x] - img[y][x] with a zero last row.
inline std::pair<Image, Image> spatial_gradient(const Image& img) {
    Image gx(img.height(), img.width(), img.channels());
    Image gy(img.height(), img.width(), img.channels());
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            for (int c = 0; c < img.channels(); ++c) {
                if (x + 1 < img.width()) gx.at(y, x, c) = img.at(y, x + 1, c) - img.at(y, x, c);
                if (y + 1 < img.height()) gy.at(y, x, c) = img.at(y + 1, x, c) - img.at(y, x, c);
            }
    return {std::move(gx), std::move(gy)};
}

// Rec. 709 luma weights for linear RGB.
inline constexpr double kLumaR = 0.2126;
inline constexpr double kLumaG = 0.7152;
inline constexpr double kLumaB = 0.0722;

inline Image luminance(const Image& img) {
    if (img.channels() != 3)
        throw InvalidArgument("luminance: expected a 3-channel image");
    Image out(img.height(), img.width(), 1);
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            out.at(y, x, 0) =
                kLumaR * img.at(y, x, 0) + kLumaG * img.at(y, x, 1) + kLumaB * img.at(y, x, 2);
    return out;
}

inline double max_value(const Image& img) {
    double m = img.data()[0];
    for (double v : img.data()) m = std::max(m, v);
    return m;
}

inline double min_value(const Image& img) {
    double m = img.data()[0];
    for (double v : img.data()) m = std::min(m, v);
    return m;
}

inline double mean_value(const Image& img) {
    double s = 0.0;
    for (double v : img.data()) s += v;
    return s / static_cast<double>(img.size());
}

} // namespace ihdr
