#pragma once

#include <cmath>
#include <utility>

#include "ihdr/image.hpp"

namespace ihdr {

// Guard used wherever the intrinsic transforms divide by a quantity that can
// reach zero. Keeps every map total and differentiable.
inline constexpr double kEpsilon = 1e-6;

// Threshold above which linearized LDR values count as near-saturated.
inline constexpr double kSoftMaskLambda = 0.8;

// Scalar illumination field, nonnegative and unbounded above.
class ShadingMap {
public:
    explicit ShadingMap(Image img) : img_(std::move(img)) {
        if (img_.channels() != 1)
            throw InvalidArgument("shading map: expected 1 channel");
        require_nonnegative(img_, "shading map");
    }
    const Image& image() const { return img_; }

private:
    Image img_;
};

// Surface reflectance, three channels, nonnegative. Ground-truth and
// estimated albedo live in [0, 1]; implied albedo may exceed 1.
class AlbedoMap {
public:
    explicit AlbedoMap(Image img) : img_(std::move(img)) {
        if (img_.channels() != 3)
            throw InvalidArgument("albedo map: expected 3 channels");
        require_nonnegative(img_, "albedo map");
    }
    const Image& image() const { return img_; }

private:
    Image img_;
};

namespace detail {
inline void require_unit_interval_open_zero(const Image& img, const char* what) {
    for (double v : img.data()) {
        if (v <= 0.0) throw InvalidArgument(std::string("degenerate inverse ") + what);
        if (v > 1.0) throw InvalidArgument(std::string(what) + ": inverse value above 1");
    }
}
} // namespace detail

// Shading mapped through s -> 1/(s+1); values in (0, 1].
class InverseShadingMap {
public:
    explicit InverseShadingMap(Image img) : img_(std::move(img)) {
        if (img_.channels() != 1)
            throw InvalidArgument("inverse shading map: expected 1 channel");
        detail::require_unit_interval_open_zero(img_, "shading");
    }
    const Image& image() const { return img_; }

private:
    Image img_;
};

// HDR image mapped through the same bounded reparameterization, per channel.
class InverseHdrImage {
public:
    explicit InverseHdrImage(Image img) : img_(std::move(img)) {
        if (img_.channels() != 3)
            throw InvalidArgument("inverse hdr image: expected 3 channels");
        detail::require_unit_interval_open_zero(img_, "hdr image");
    }
    const Image& image() const { return img_; }

private:
    Image img_;
};

// Per-channel saturation guidance mask in [0, 1].
class SoftMask {
public:
    explicit SoftMask(Image img) : img_(std::move(img)) {
        if (img_.channels() != 3)
            throw InvalidArgument("soft mask: expected 3 channels");
        for (double v : img_.data())
            if (v < 0.0 || v > 1.0) throw InvalidArgument("soft mask: value outside [0, 1]");
    }
    const Image& image() const { return img_; }

private:
    Image img_;
};

// I_c = A_c * S per pixel and channel.
inline Image compose(const AlbedoMap& albedo, const ShadingMap& shading) {
    const Image& a = albedo.image();
    const Image& s = shading.image();
    if (a.height() != s.height() || a.width() != s.width())
        throw InvalidArgument("compose: dimension mismatch");
    Image out(a.height(), a.width(), 3);
    for (int y = 0; y < a.height(); ++y)
        for (int x = 0; x < a.width(); ++x)
            for (int c = 0; c < 3; ++c)
                out.at(y, x, c) = a.at(y, x, c) * s.at(y, x, 0);
    return out;
}

inline InverseShadingMap shading_to_inverse(const ShadingMap& shading) {
    const Image& s = shading.image();
    Image out(s.height(), s.width(), 1);
    for (std::size_t i = 0; i < s.size(); ++i)
        out.data()[i] = 1.0 / (s.data()[i] + 1.0);
    return InverseShadingMap(std::move(out));
}

inline ShadingMap inverse_to_shading(const InverseShadingMap& inv) {
    const Image& d = inv.image();
    Image out(d.height(), d.width(), 1);
    for (std::size_t i = 0; i < d.size(); ++i)
        out.data()[i] = (1.0 - d.data()[i]) / d.data()[i];
    return ShadingMap(std::move(out));
}

inline InverseHdrImage image_to_inverse(const Image& img) {
    if (img.channels() != 3)
        throw InvalidArgument("image_to_inverse: expected 3 channels");
    require_nonnegative(img, "image_to_inverse");
    Image out(img.height(), img.width(), 3);
    for (std::size_t i = 0; i < img.size(); ++i)
        out.data()[i] = 1.0 / (img.data()[i] + 1.0);
    return InverseHdrImage(std::move(out));
}

inline Image inverse_to_image(const InverseHdrImage& inv) {
    const Image& j = inv.image();
    Image out(j.height(), j.width(), 3);
    for (std::size_t i = 0; i < j.size(); ++i)
        out.data()[i] = (1.0 - j.data()[i]) / j.data()[i];
    return out;
}

// Albedo forced by a ground-truth image and an inverse shading estimate:
// S = (1-D)/D, then A_c = I_c / max(S, eps).
inline AlbedoMap implied_albedo(const Image& i_gt, const InverseShadingMap& inv_shading) {
    const Image& d = inv_shading.image();
    if (i_gt.height() != d.height() || i_gt.width() != d.width())
        throw InvalidArgument("implied_albedo: dimension mismatch");
    if (i_gt.channels() != 3)
        throw InvalidArgument("implied_albedo: expected a 3-channel image");
    Image out(d.height(), d.width(), 3);
    for (int y = 0; y < d.height(); ++y)
        for (int x = 0; x < d.width(); ++x) {
            const double dv = d.at(y, x, 0);
            const double s = std::max((1.0 - dv) / dv, kEpsilon);
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = i_gt.at(y, x, c) / s;
        }
    return AlbedoMap(std::move(out));
}

// Inverse shading forced by an albedo estimate and the ground-truth image.
// The per-channel ratios A_c/(I_c + A_c + eps) collapse to one channel by
// arithmetic mean.
inline InverseShadingMap implied_inverse_shading(const AlbedoMap& albedo, const Image& i_gt) {
    const Image& a = albedo.image();
    if (a.height() != i_gt.height() || a.width() != i_gt.width())
        throw InvalidArgument("implied_inverse_shading: dimension mismatch");
    if (i_gt.channels() != 3)
        throw InvalidArgument("implied_inverse_shading: expected a 3-channel image");
    Image out(a.height(), a.width(), 1);
    for (int y = 0; y < a.height(); ++y)
        for (int x = 0; x < a.width(); ++x) {
            double acc = 0.0;
            for (int c = 0; c < 3; ++c) {
                const double av = a.at(y, x, c);
                acc += av / (i_gt.at(y, x, c) + av + kEpsilon);
            }
            out.at(y, x, 0) = acc / 3.0;
        }
    return InverseShadingMap(std::move(out));
}

// alpha = max(0, I - lambda) / (1 - lambda), per channel.
inline SoftMask soft_mask(const Image& ldr_linear, double lambda = kSoftMaskLambda) {
    if (ldr_linear.channels() != 3)
        throw InvalidArgument("soft_mask: expected a 3-channel image");
    if (!(lambda >= 0.0 && lambda < 1.0))
        throw InvalidArgument("soft_mask: lambda must be in [0, 1)");
    Image out(ldr_linear.height(), ldr_linear.width(), 3);
    for (std::size_t i = 0; i < out.size(); ++i)
        out.data()[i] = std::max(0.0, ldr_linear.data()[i] - lambda) / (1.0 - lambda);
    return SoftMask(std::move(out));
}

// Initial HDR estimate from the two intrinsic estimates: A * (1-D)/D.
inline Image combine_intrinsics(const AlbedoMap& albedo, const InverseShadingMap& inv_shading) {
    const Image& a = albedo.image();
    const Image& d = inv_shading.image();
    if (a.height() != d.height() || a.width() != d.width())
        throw InvalidArgument("combine_intrinsics: dimension mismatch");
    Image out(a.height(), a.width(), 3);
    for (int y = 0; y < a.height(); ++y)
        for (int x = 0; x < a.width(); ++x) {
            const double dv = d.at(y, x, 0);
            const double s = (1.0 - dv) / dv;
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = a.at(y, x, c) * s;
        }
    return out;
}

} // namespace ihdr
