#pragma once

#include <array>

// PU21 transfer-function constants.
//
// Transcribed verbatim from the reference implementation published by the
// authors of PU21 (Azimi & Mantiuk, gfxdisp/pu21, file pu21_encoder.m), fit
// variant 'banding_glare'. The encoding maps absolute luminance in
// [0.005, 10000] cd/m^2 to approximately [0, 600] perceptually uniform
// units, with 100 cd/m^2 (SDR diffuse white) mapping to ~256:
//
//   V = p7 * ( ((p1 + p2*Y^p4) / (1 + p3*Y^p4))^p5 - p6 ), clamped at 0.
//
// Do not edit these digits; tests pin spot values of the curve against the
// reference implementation.

namespace ihdr::pu21 {

inline constexpr std::array<double, 7> kBandingGlare = {
    0.353487901,     // p1
    0.3734658629,    // p2
    8.277049286e-05, // p3
    0.9062562627,    // p4
    0.09150303166,   // p5
    0.9099517204,    // p6
    596.3148142,     // p7
};

inline constexpr double kLuminanceMin = 0.005; // cd/m^2
inline constexpr double kLuminanceMax = 10000.0;

// Encoded value of SDR diffuse white, used as the PSNR peak.
inline constexpr double kPeakEncoded = 256.0;

} // namespace ihdr::pu21
