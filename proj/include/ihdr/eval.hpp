#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "ihdr/image.hpp"
#include "ihdr/pu21_constants.hpp"

namespace ihdr {

// Anchor the ground truth to [1, 1000]: scale so the maximum hits 1000, then
// clamp the floor at 1. The mapped values are treated as cd/m^2 downstream.
inline Image map_to_range(const Image& gt) {
    const double peak = max_value(gt);
    if (!(peak > 0.0)) throw InvalidArgument("map_to_range: image has no positive values");
    Image out(gt.height(), gt.width(), gt.channels());
    // divide first so the peak lands on exactly 1000
    for (std::size_t i = 0; i < gt.size(); ++i)
        out.data()[i] = std::max(gt.data()[i] / peak * 1000.0, 1.0);
    return out;
}

namespace eval_detail {

// Pixel window for scale alignment: ground-truth luminance between its 10th
// and 90th percentiles, inclusive. The window is defined on the ground truth
// so it does not depend on the prediction.
inline std::vector<std::size_t> percentile_window(const Image& gt) {
    const Image lum = luminance(gt);
    const double lo = percentile(lum.data(), 10.0);
    const double hi = percentile(lum.data(), 90.0);
    std::vector<std::size_t> pixels;
    for (std::size_t px = 0; px < lum.size(); ++px) {
        const double v = lum.data()[px];
        if (v >= lo && v <= hi) pixels.push_back(px);
    }
    return pixels;
}

} // namespace eval_detail

// Closed-form one-parameter least squares over the windowed pixels:
// s = sum(pred*gt) / sum(pred*pred) across all channels.
inline double align_scale(const Image& pred, const Image& gt) {
    if (!pred.same_dims(gt)) throw InvalidArgument("align_scale: dimension mismatch");
    if (gt.channels() != 3) throw InvalidArgument("align_scale: expected 3 channels");
    const std::vector<std::size_t> window = eval_detail::percentile_window(gt);
    if (window.empty()) throw InvalidArgument("align_scale: empty percentile window");
    double num = 0.0;
    double den = 0.0;
    for (std::size_t px : window)
        for (int c = 0; c < 3; ++c) {
            const double p = pred.data()[px * 3 + c];
            num += p * gt.data()[px * 3 + c];
            den += p * p;
        }
    if (!(den > 0.0)) throw InvalidArgument("align_scale: prediction is zero inside the window");
    return num / den;
}

using CrfCoefficients = std::array<std::array<double, 4>, 3>; // [channel][power]

namespace eval_detail {

// Solves the 4x4 system a*x = b in place by Gauss-Jordan elimination with
// partial pivoting. Long double throughout; the normal equations of a cubic
// Vandermonde fit are poorly conditioned enough that double here costs
// several digits in the recovered coefficients.
inline std::array<double, 4> solve4(std::array<std::array<long double, 5>, 4> m) {
    // relative singularity threshold against the largest entry
    long double extent = 0.0L;
    for (const auto& row : m)
        for (int k = 0; k < 4; ++k) extent = std::max(extent, std::fabs(row[k]));
    if (extent == 0.0L) throw NumericalError("degenerate CRF fit");
    for (int col = 0; col < 4; ++col) {
        int pivot = col;
        for (int r = col + 1; r < 4; ++r)
            if (std::fabs(m[r][col]) > std::fabs(m[pivot][col])) pivot = r;
        if (std::fabs(m[pivot][col]) < 1e-14L * extent) throw NumericalError("degenerate CRF fit");
        std::swap(m[col], m[pivot]);
        for (int r = 0; r < 4; ++r) {
            if (r == col) continue;
            const long double f = m[r][col] / m[col][col];
            for (int k = col; k < 5; ++k) m[r][k] -= f * m[col][k];
        }
    }
    std::array<double, 4> x{};
    for (int i = 0; i < 4; ++i) x[i] = static_cast<double>(m[i][4] / m[i][i]);
    return x;
}

inline double eval_poly3(const std::array<double, 4>& a, double x) {
    return a[0] + x * (a[1] + x * (a[2] + x * a[3]));
}

inline constexpr double kLogFloor = 1e-6; // clamp before log

} // namespace eval_detail

// Per-channel least-squares fit of log(gt) against a cubic in log(pred),
// over all pixels. Values are clamped at 1e-6 before the logs.
inline CrfCoefficients fit_crf_correction(const Image& pred_aligned, const Image& gt) {
    if (!pred_aligned.same_dims(gt)) throw InvalidArgument("fit_crf_correction: dimension mismatch");
    if (gt.channels() != 3) throw InvalidArgument("fit_crf_correction: expected 3 channels");
    CrfCoefficients coeffs{};
    const std::size_t pixels = gt.size() / 3;
    for (int c = 0; c < 3; ++c) {
        // Normal equations for the Vandermonde system in log space.
        std::array<long double, 7> xpow{}; // sums of x^0 .. x^6
        std::array<long double, 4> xy{};   // sums of y * x^0 .. x^3
        for (std::size_t px = 0; px < pixels; ++px) {
            const long double x =
                std::log(std::max(pred_aligned.data()[px * 3 + c], eval_detail::kLogFloor));
            const long double y = std::log(std::max(gt.data()[px * 3 + c], eval_detail::kLogFloor));
            long double xp = 1.0L;
            for (int k = 0; k <= 6; ++k) {
                xpow[k] += xp;
                if (k <= 3) xy[k] += y * xp;
                xp *= x;
            }
        }
        std::array<std::array<long double, 5>, 4> system{};
        for (int r = 0; r < 4; ++r) {
            for (int k = 0; k < 4; ++k) system[r][k] = xpow[r + k];
            system[r][4] = xy[r];
        }
        coeffs[c] = eval_detail::solve4(system);
    }
    return coeffs;
}

inline Image apply_crf_correction(const Image& pred, const CrfCoefficients& coeffs) {
    if (pred.channels() != 3) throw InvalidArgument("apply_crf_correction: expected 3 channels");
    Image out(pred.height(), pred.width(), 3);
    const std::size_t pixels = pred.size() / 3;
    for (std::size_t px = 0; px < pixels; ++px)
        for (int c = 0; c < 3; ++c) {
            const double x = std::log(std::max(pred.data()[px * 3 + c], eval_detail::kLogFloor));
            out.data()[px * 3 + c] = std::exp(eval_detail::eval_poly3(coeffs[c], x));
        }
    return out;
}

enum class Pu21Variant { banding_glare };

struct Pu21Result {
    Image encoded;
    bool clamped = false; // some input was outside [0.005, 10000] cd/m^2
};

// PU21 perceptually uniform encoding of absolute luminance. Out-of-domain
// values are clamped to the domain boundaries and flagged.
inline Pu21Result pu21_encode(const Image& luminance_cd_m2,
                              Pu21Variant variant = Pu21Variant::banding_glare) {
    if (variant != Pu21Variant::banding_glare)
        throw InvalidArgument("pu21_encode: unsupported variant");
    const auto& p = pu21::kBandingGlare;
    Pu21Result result{Image(luminance_cd_m2.height(), luminance_cd_m2.width(),
                            luminance_cd_m2.channels()),
                      false};
    for (std::size_t i = 0; i < luminance_cd_m2.size(); ++i) {
        double y = luminance_cd_m2.data()[i];
        if (y < pu21::kLuminanceMin || y > pu21::kLuminanceMax) {
            y = std::clamp(y, pu21::kLuminanceMin, pu21::kLuminanceMax);
            result.clamped = true;
        }
        const double t = std::pow(y, p[3]);
        const double v = p[6] * (std::pow((p[0] + p[1] * t) / (1.0 + p[2] * t), p[4]) - p[5]);
        result.encoded.data()[i] = std::max(v, 0.0);
    }
    return result;
}

inline double pu21_encode_value(double y, Pu21Variant variant = Pu21Variant::banding_glare) {
    Image one(1, 1, 1);
    one.data()[0] = y;
    return pu21_encode(one, variant).encoded.data()[0];
}

// Per-image record of the full protocol.
struct EvalReport {
    std::string id;
    double scale = 1.0;
    CrfCoefficients crf_coeffs{};
    double pu21_psnr = 0.0; // dB; +inf when the corrected prediction is exact
    double rmse_linear = 0.0;
    bool pu21_clamped = false;
};

// Full protocol: range-map the ground truth, least-squares align the
// prediction scale inside the percentile window, fit and apply the log-RGB
// cubic CRF correction, then report PU21-PSNR and linear RMSE.
inline EvalReport evaluate(const Image& pred, const Image& gt, std::string id = "") {
    if (!pred.same_dims(gt)) throw InvalidArgument("evaluate: dimension mismatch");
    EvalReport report;
    report.id = std::move(id);

    const Image gt_ranged = map_to_range(gt);
    report.scale = align_scale(pred, gt_ranged);

    Image scaled(pred.height(), pred.width(), 3);
    for (std::size_t i = 0; i < pred.size(); ++i)
        scaled.data()[i] = report.scale * pred.data()[i];

    report.crf_coeffs = fit_crf_correction(scaled, gt_ranged);
    const Image corrected = apply_crf_correction(scaled, report.crf_coeffs);

    double se_linear = 0.0;
    for (std::size_t i = 0; i < corrected.size(); ++i) {
        const double d = corrected.data()[i] - gt_ranged.data()[i];
        se_linear += d * d;
    }
    report.rmse_linear = std::sqrt(se_linear / static_cast<double>(corrected.size()));

    const Pu21Result enc_pred = pu21_encode(corrected);
    const Pu21Result enc_gt = pu21_encode(gt_ranged);
    report.pu21_clamped = enc_pred.clamped || enc_gt.clamped;

    double se_encoded = 0.0;
    for (std::size_t i = 0; i < enc_pred.encoded.size(); ++i) {
        const double d = enc_pred.encoded.data()[i] - enc_gt.encoded.data()[i];
        se_encoded += d * d;
    }
    const double mse = se_encoded / static_cast<double>(enc_pred.encoded.size());
    // An exact prediction leaves only exp/log rounding noise (encoded MSE
    // around 1e-22); anything genuinely different sits many orders above the
    // floor. Report the infinity sentinel below it.
    constexpr double kZeroMseFloor = 1e-18;
    report.pu21_psnr = mse <= kZeroMseFloor
                           ? std::numeric_limits<double>::infinity()
                           : 10.0 * std::log10(pu21::kPeakEncoded * pu21::kPeakEncoded / mse);
    return report;
}

} // namespace ihdr
