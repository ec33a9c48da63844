#pragma once

#include <utility>
#include <vector>

#include "ihdr/intrinsic.hpp"
#include "ihdr/isp.hpp"
#include "ihdr/nets.hpp"

namespace ihdr {

// Per-channel saturation mask collapsed to one channel: a pixel needs color
// reconstruction as soon as any channel is near-saturated.
inline Image mask_channel_max(const SoftMask& mask) {
    const Image& m = mask.image();
    Image out(m.height(), m.width(), 1);
    for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x)
            out.at(y, x, 0) = std::max({m.at(y, x, 0), m.at(y, x, 1), m.at(y, x, 2)});
    return out;
}

// Everything the three-stage pipeline needs about one LDR observation.
struct ReconstructionInputs {
    Image ldr_linear; // 3ch, [0, 1]
    Image d_ldr;      // 1ch inverse LDR shading
    Image a_ldr;      // 3ch LDR albedo
    Image mask;       // 1ch saturation guidance
};

// Oracle path: the LDR decomposition comes from the scene ground truth.
inline ReconstructionInputs make_reconstruction_inputs(const SyntheticScene& scene,
                                                       const IspParams& p) {
    Image linearized = simulate_ldr(scene, p).linearized;
    LdrIntrinsics intr = oracle_ldr_decomposition(scene, p);
    Image d_ldr = shading_to_inverse(intr.shading_ldr).image();
    Image mask = mask_channel_max(soft_mask(linearized));
    return {std::move(linearized), std::move(d_ldr), intr.albedo_ldr.image(), std::move(mask)};
}

// Self-contained fallback for arbitrary LDR inputs: treat the luminance as
// shading and divide it out. Crude, but it gives the networks an input of
// the right form when no decomposition is available.
inline ReconstructionInputs make_reconstruction_inputs(const Image& ldr_linear) {
    if (ldr_linear.channels() != 3)
        throw InvalidArgument("reconstruction inputs: expected a 3-channel image");
    Image lum = luminance(ldr_linear);
    Image a_ldr(ldr_linear.height(), ldr_linear.width(), 3);
    Image d_ldr(ldr_linear.height(), ldr_linear.width(), 1);
    for (int y = 0; y < ldr_linear.height(); ++y)
        for (int x = 0; x < ldr_linear.width(); ++x) {
            const double s = std::min(lum.at(y, x, 0), 1.0);
            d_ldr.at(y, x, 0) = 1.0 / (s + 1.0);
            for (int c = 0; c < 3; ++c)
                a_ldr.at(y, x, c) = std::clamp(ldr_linear.at(y, x, c) / std::max(s, kEpsilon), 0.0, 1.0);
        }
    Image mask = mask_channel_max(soft_mask(ldr_linear));
    return {ldr_linear, std::move(d_ldr), std::move(a_ldr), std::move(mask)};
}

struct Reconstruction {
    Image d_hdr;       // 1ch inverse HDR shading estimate
    Image a_hdr;       // 3ch HDR albedo estimate
    Image initial_hdr; // intrinsic recombination of the two
    Image j_hdr;       // refined inverse HDR image
    Image final_hdr;   // refined HDR image
};

// Full three-stage inference. Channel bookkeeping per stage: shading net
// consumes 3+1, albedo net 3+3+1, refinement net 3+3+1+3 = 10.
inline Reconstruction reconstruct(const ReconstructionInputs& in, const ToyNet& shading_net,
                                  const ToyNet& albedo_net, const ToyNet& refine_net) {
    if (shading_net.role() != NetRole::shading || albedo_net.role() != NetRole::albedo ||
        refine_net.role() != NetRole::refinement)
        throw InvalidArgument("reconstruct: networks passed in the wrong order");

    Image d_hdr = shading_net.infer({&in.ldr_linear, &in.d_ldr});
    Image a_hdr = albedo_net.infer({&in.ldr_linear, &in.a_ldr, &in.mask});

    AlbedoMap a_map(a_hdr);
    InverseShadingMap d_map(d_hdr);
    Image initial = combine_intrinsics(a_map, d_map);
    Image j_initial = image_to_inverse(initial).image();

    Image j_hdr = refine_net.infer({&in.ldr_linear, &j_initial, &d_hdr, &a_hdr});
    Image final_hdr = inverse_to_image(InverseHdrImage(j_hdr));
    return {std::move(d_hdr), std::move(a_hdr), std::move(initial), std::move(j_hdr),
            std::move(final_hdr)};
}

} // namespace ihdr
