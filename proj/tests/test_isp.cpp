#include <catch2/catch_amalgamated.hpp>

#include "ihdr/isp.hpp"
#include "test_util.hpp"

using namespace ihdr;

namespace {

SyntheticScene make_flat_scene(double ar, double ag, double ab, double s) {
    Image albedo(16, 16, 3);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
            albedo.at(y, x, 0) = ar;
            albedo.at(y, x, 1) = ag;
            albedo.at(y, x, 2) = ab;
        }
    Image shading(16, 16, 1, s);
    AlbedoMap a(std::move(albedo));
    ShadingMap sm(std::move(shading));
    Image hdr = compose(a, sm);
    return {std::move(a), std::move(sm), std::move(hdr), 0};
}

} // namespace

TEST_CASE("simulate_ldr anchors") {
    SECTION("saturation fixed point") {
        SyntheticScene scene = make_flat_scene(1.0, 1.0, 1.0, 1.0);
        LdrSimulation sim = simulate_ldr(scene, IspParams{0.0, 2.2, 8});
        REQUIRE(sim.ldr.at(3, 3, 0) == 255);
        REQUIRE(sim.linearized.at(3, 3, 0) == 1.0);
    }
    SECTION("zero maps to zero") {
        SyntheticScene scene = make_flat_scene(0.5, 0.5, 0.5, 0.0);
        LdrSimulation sim = simulate_ldr(scene, IspParams{1.7, 2.2, 8});
        REQUIRE(sim.ldr.at(0, 0, 0) == 0);
        REQUIRE(sim.linearized.at(0, 0, 0) == 0.0);
    }
    SECTION("hand-evaluated chain with unit gamma") {
        // hdr 0.25 at t = 1 exposes to 0.5; round(0.5 * 255) = 128.
        SyntheticScene scene = make_flat_scene(0.25, 0.25, 0.25, 1.0);
        LdrSimulation sim = simulate_ldr(scene, IspParams{1.0, 1.0, 8});
        REQUIRE(sim.ldr.at(0, 0, 0) == 128);
        REQUIRE_THAT(sim.linearized.at(0, 0, 0),
                     Catch::Matchers::WithinRel(128.0 / 255.0, 1e-15));
    }
}

TEST_CASE("quantizer rounding error bounded by half a code") {
    Rng rng(123);
    for (int trial = 0; trial < 20; ++trial) {
        SyntheticScene scene = generate_scene(trial, 24, 24);
        IspParams p{rng.uniform(-3.0, 3.0), 2.2, 8};
        LdrSimulation sim = simulate_ldr(scene, p);
        const double gain = std::exp2(p.exposure_stops);
        const double cap = 255.0;
        for (std::size_t i = 0; i < scene.hdr_gt.size(); ++i) {
            const double clipped = std::min(gain * scene.hdr_gt.data()[i], 1.0);
            const double crf = std::pow(clipped, 1.0 / p.crf_gamma);
            REQUIRE(std::fabs(crf - sim.ldr.data[i] / cap) <= 0.5 / cap + 1e-12);
        }
    }
}

TEST_CASE("oracle LDR decomposition") {
    SECTION("unclipped pixels recover the albedo (gamma 1, 16-bit)") {
        SyntheticScene scene = make_flat_scene(0.3, 0.5, 0.7, 0.5);
        LdrIntrinsics intr = oracle_ldr_decomposition(scene, IspParams{0.0, 1.0, 16});
        REQUIRE_THAT(intr.albedo_ldr.image().at(4, 4, 0), Catch::Matchers::WithinAbs(0.3, 1e-3));
        REQUIRE_THAT(intr.albedo_ldr.image().at(4, 4, 1), Catch::Matchers::WithinAbs(0.5, 1e-3));
        REQUIRE_THAT(intr.albedo_ldr.image().at(4, 4, 2), Catch::Matchers::WithinAbs(0.7, 1e-3));
        REQUIRE(intr.shading_ldr.image().at(4, 4, 0) == 0.5);
    }
    SECTION("fully saturated pixel goes white") {
        SyntheticScene scene = make_flat_scene(0.9, 0.9, 0.9, 10.0);
        LdrIntrinsics intr = oracle_ldr_decomposition(scene, IspParams{0.0, 2.2, 8});
        REQUIRE(intr.shading_ldr.image().at(0, 0, 0) == 1.0);
        for (int c = 0; c < 3; ++c) REQUIRE(intr.albedo_ldr.image().at(0, 0, c) == 1.0);
    }
    SECTION("clipping desaturates colors toward white") {
        SyntheticScene scene = make_flat_scene(1.0, 0.2, 0.2, 2.0);
        LdrIntrinsics intr = oracle_ldr_decomposition(scene, IspParams{0.0, 1.0, 16});
        REQUIRE(intr.shading_ldr.image().at(0, 0, 0) == 1.0);
        REQUIRE_THAT(intr.albedo_ldr.image().at(0, 0, 0), Catch::Matchers::WithinAbs(1.0, 1e-3));
        REQUIRE_THAT(intr.albedo_ldr.image().at(0, 0, 1), Catch::Matchers::WithinAbs(0.4, 1e-3));
        REQUIRE_THAT(intr.albedo_ldr.image().at(0, 0, 2), Catch::Matchers::WithinAbs(0.4, 1e-3));
    }
    SECTION("product identity where the albedo clamp is inactive") {
        for (std::uint64_t seed = 50; seed < 60; ++seed) {
            SyntheticScene scene = generate_scene(seed, 24, 24);
            IspParams p{1.0, 2.2, 8};
            LdrSimulation sim = simulate_ldr(scene, p);
            LdrIntrinsics intr = oracle_ldr_decomposition(scene, p);
            for (int y = 0; y < 24; ++y)
                for (int x = 0; x < 24; ++x) {
                    const double s = intr.shading_ldr.image().at(y, x, 0);
                    if (s < 2.0 * kEpsilon) continue;
                    for (int c = 0; c < 3; ++c) {
                        const double a = intr.albedo_ldr.image().at(y, x, c);
                        if (a >= 1.0) continue; // clamp active
                        REQUIRE(std::fabs(sim.linearized.at(y, x, c) - a * s) <= 1e-5);
                    }
                }
        }
    }
}

TEST_CASE("generate_scene") {
    SECTION("deterministic in the seed") {
        SyntheticScene a = generate_scene(42, 32, 24);
        SyntheticScene b = generate_scene(42, 32, 24);
        REQUIRE(a.hdr_gt.data().size() == b.hdr_gt.data().size());
        for (std::size_t i = 0; i < a.hdr_gt.size(); ++i)
            REQUIRE(a.hdr_gt.data()[i] == b.hdr_gt.data()[i]);
        for (std::size_t i = 0; i < a.shading_gt.image().size(); ++i)
            REQUIRE(a.shading_gt.image().data()[i] == b.shading_gt.image().data()[i]);
    }
    SECTION("hdr is the exact composition") {
        SyntheticScene scene = generate_scene(7, 20, 28);
        Image recomposed = compose(scene.albedo_gt, scene.shading_gt);
        for (std::size_t i = 0; i < recomposed.size(); ++i)
            REQUIRE(recomposed.data()[i] == scene.hdr_gt.data()[i]);
    }
    SECTION("shading histogram: bright peak and bounded clipped tail, 100 seeds") {
        for (std::uint64_t seed = 0; seed < 100; ++seed) {
            SyntheticScene scene = generate_scene(seed, 32, 32);
            const Image& s = scene.shading_gt.image();
            REQUIRE(max_value(s) >= 2.0);
            std::size_t above = 0;
            for (double v : s.data())
                if (v > 1.0) ++above;
            const double frac = static_cast<double>(above) / static_cast<double>(s.size());
            REQUIRE(frac > 0.0);
            REQUIRE(frac < 0.5);
        }
    }
    SECTION("albedo values stay inside the sampled range") {
        SyntheticScene scene = generate_scene(11, 16, 16);
        for (double v : scene.albedo_gt.image().data()) {
            REQUIRE(v >= 0.05);
            REQUIRE(v <= 0.95);
        }
    }
    SECTION("minimum size") {
        REQUIRE_THROWS_AS(generate_scene(0, 8, 32), InvalidArgument);
    }
}

TEST_CASE("sample_exposure") {
    SECTION("always inside [-3, 3] and mean near zero") {
        Rng rng(2024);
        double sum = 0.0;
        const int n = 100000;
        for (int i = 0; i < n; ++i) {
            const double t = sample_exposure(rng);
            REQUIRE(t >= -3.0);
            REQUIRE(t <= 3.0);
            sum += t;
        }
        REQUIRE(std::fabs(sum / n) < 0.02);
    }
    SECTION("reproducible sequence") {
        Rng a(5), b(5);
        for (int i = 0; i < 100; ++i) REQUIRE(sample_exposure(a) == sample_exposure(b));
    }
}

TEST_CASE("clipped fraction is nondecreasing in exposure") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        SyntheticScene scene = generate_scene(seed, 32, 32);
        double prev = 0.0;
        for (double t = -3.0; t <= 3.01; t += 0.25) {
            const double frac = clipped_fraction(scene.hdr_gt, t);
            REQUIRE(frac >= prev);
            prev = frac;
        }
    }
}

TEST_CASE("isp parameter validation") {
    REQUIRE_THROWS_AS((IspParams{0.0, 0.0, 8}).validate(), InvalidArgument);
    REQUIRE_THROWS_AS((IspParams{0.0, 2.2, 0}).validate(), InvalidArgument);
    REQUIRE_THROWS_AS((IspParams{0.0, 2.2, 17}).validate(), InvalidArgument);
}
