#include <catch2/catch_amalgamated.hpp>

#include "ihdr/eval.hpp"
#include "ihdr/rng.hpp"
#include "test_util.hpp"

using namespace ihdr;

namespace {

// Windowed squared alignment error, recomputed from scratch for the
// brute-force scan oracle.
double windowed_error(const Image& pred, const Image& gt, double s) {
    const Image lum = luminance(gt);
    const double lo = percentile(lum.data(), 10.0);
    const double hi = percentile(lum.data(), 90.0);
    double err = 0.0;
    for (std::size_t px = 0; px < lum.size(); ++px) {
        if (lum.data()[px] < lo || lum.data()[px] > hi) continue;
        for (int c = 0; c < 3; ++c) {
            const double d = s * pred.data()[px * 3 + c] - gt.data()[px * 3 + c];
            err += d * d;
        }
    }
    return err;
}

Image ranged_random(Rng& rng, int h, int w) {
    Image img = test_util::random_image(rng, h, w, 3, 0.001, 1.0);
    return map_to_range(img);
}

} // namespace

TEST_CASE("map_to_range") {
    Rng rng(1);
    Image img = test_util::random_image(rng, 8, 8, 3, 0.0, 7.0);
    img.at(0, 0, 0) = 7.5; // known maximum
    Image out = map_to_range(img);
    REQUIRE(out.at(0, 0, 0) == 1000.0);
    REQUIRE(max_value(out) == 1000.0);
    for (double v : out.data()) REQUIRE(v >= 1.0);

    SECTION("values at max/1000 and far below map to the floor") {
        Image tiny(1, 2, 3, 1.0);
        tiny.at(0, 0, 0) = 1000.0;
        tiny.at(0, 1, 0) = 1.0;     // max/1000
        tiny.at(0, 1, 1) = 1e-3;    // max/1e6
        Image mapped = map_to_range(tiny);
        REQUIRE(mapped.at(0, 0, 0) == 1000.0);
        REQUIRE_THAT(mapped.at(0, 1, 0), Catch::Matchers::WithinRel(1.0, 1e-12));
        REQUIRE(mapped.at(0, 1, 1) == 1.0); // clamped
    }
    SECTION("all-zero input is an error") {
        Image zeros(4, 4, 3, 0.0);
        REQUIRE_THROWS_AS(map_to_range(zeros), InvalidArgument);
    }
}

TEST_CASE("align_scale") {
    Rng rng(2);
    Image gt = ranged_random(rng, 12, 12);

    SECTION("exact multiples") {
        Image pred(12, 12, 3);
        for (std::size_t i = 0; i < gt.size(); ++i) pred.data()[i] = 2.0 * gt.data()[i];
        REQUIRE(align_scale(pred, gt) == 0.5);
        REQUIRE(align_scale(gt, gt) == 1.0);
    }
    SECTION("returned scale minimizes the windowed error (grid scan oracle)") {
        Image pred = test_util::random_image(rng, 12, 12, 3, 1.0, 900.0);
        const double s = align_scale(pred, gt);
        const double best = windowed_error(pred, gt, s);
        for (int k = -100; k <= 100; ++k) {
            const double cand = s * (1.0 + 0.01 * k);
            REQUIRE(best <= windowed_error(pred, gt, cand) + 1e-9 * best);
        }
    }
    SECTION("outliers outside the percentile window are ignored") {
        // Prediction is a perfect 1/3-scaled copy inside the window and
        // garbage at the brightest and darkest pixels.
        Image pred(12, 12, 3);
        for (std::size_t i = 0; i < gt.size(); ++i) pred.data()[i] = 3.0 * gt.data()[i];
        const Image lum = luminance(gt);
        const double lo = percentile(lum.data(), 10.0);
        const double hi = percentile(lum.data(), 90.0);
        for (std::size_t px = 0; px < lum.size(); ++px)
            if (lum.data()[px] < lo || lum.data()[px] > hi)
                for (int c = 0; c < 3; ++c) pred.data()[px * 3 + c] = rng.uniform(0.0, 1e6);
        const double s = align_scale(pred, gt);
        REQUIRE_THAT(s, Catch::Matchers::WithinRel(1.0 / 3.0, 1e-12));
        // and it must still be the brute-force minimizer
        const double best = windowed_error(pred, gt, s);
        for (int k = -50; k <= 50; ++k)
            REQUIRE(best <= windowed_error(pred, gt, s * (1.0 + 0.02 * k)) + 1e-9 * best);
    }
    SECTION("zero prediction in the window is an error") {
        Image pred(12, 12, 3, 0.0);
        REQUIRE_THROWS_AS(align_scale(pred, gt), InvalidArgument);
    }
}

TEST_CASE("crf correction fit") {
    Rng rng(3);
    Image gt = ranged_random(rng, 16, 16);

    SECTION("identity data recovers the identity polynomial") {
        CrfCoefficients a = fit_crf_correction(gt, gt);
        for (int c = 0; c < 3; ++c) {
            REQUIRE_THAT(a[c][0], Catch::Matchers::WithinAbs(0.0, 1e-8));
            REQUIRE_THAT(a[c][1], Catch::Matchers::WithinAbs(1.0, 1e-8));
            REQUIRE_THAT(a[c][2], Catch::Matchers::WithinAbs(0.0, 1e-8));
            REQUIRE_THAT(a[c][3], Catch::Matchers::WithinAbs(0.0, 1e-8));
        }
    }
    SECTION("squared prediction recovers a slope of one half") {
        Image pred(16, 16, 3);
        for (std::size_t i = 0; i < gt.size(); ++i)
            pred.data()[i] = gt.data()[i] * gt.data()[i];
        CrfCoefficients a = fit_crf_correction(pred, gt);
        for (int c = 0; c < 3; ++c) {
            REQUIRE_THAT(a[c][0], Catch::Matchers::WithinAbs(0.0, 1e-8));
            REQUIRE_THAT(a[c][1], Catch::Matchers::WithinAbs(0.5, 1e-8));
            REQUIRE_THAT(a[c][2], Catch::Matchers::WithinAbs(0.0, 1e-8));
            REQUIRE_THAT(a[c][3], Catch::Matchers::WithinAbs(0.0, 1e-8));
        }
    }
    SECTION("recovers a synthetic cubic log-distortion") {
        // gt is constructed from pred through a known cubic in log space;
        // the fit must give those coefficients back.
        const std::array<std::array<double, 4>, 3> truth = {{{0.1, 0.9, 0.02, -0.003},
                                                             {-0.05, 1.1, -0.01, 0.002},
                                                             {0.2, 0.8, 0.03, -0.001}}};
        Image pred = test_util::random_image(rng, 16, 16, 3, 1.0, 1000.0);
        Image distorted(16, 16, 3);
        for (std::size_t px = 0; px < pred.size() / 3; ++px)
            for (int c = 0; c < 3; ++c) {
                const double x = std::log(pred.data()[px * 3 + c]);
                const double y =
                    truth[c][0] + x * (truth[c][1] + x * (truth[c][2] + x * truth[c][3]));
                distorted.data()[px * 3 + c] = std::exp(y);
            }
        CrfCoefficients a = fit_crf_correction(pred, distorted);
        for (int c = 0; c < 3; ++c)
            for (int k = 0; k < 4; ++k)
                REQUIRE_THAT(a[c][k], Catch::Matchers::WithinAbs(truth[c][k], 1e-6));
        // applying the fitted correction reproduces the distorted image
        Image corrected = apply_crf_correction(pred, a);
        REQUIRE(test_util::max_rel_diff(corrected, distorted) < 1e-9);
    }
    SECTION("constant prediction is degenerate") {
        Image pred(16, 16, 3, 5.0);
        REQUIRE_THROWS_WITH(fit_crf_correction(pred, gt), "degenerate CRF fit");
    }
    SECTION("fit never loses to the identity polynomial in log space") {
        for (int trial = 0; trial < 5; ++trial) {
            Image pred = test_util::random_image(rng, 12, 12, 3, 1.0, 1000.0);
            Image target = ranged_random(rng, 12, 12);
            CrfCoefficients a = fit_crf_correction(pred, target);
            double fit_err = 0.0, id_err = 0.0;
            for (std::size_t px = 0; px < pred.size() / 3; ++px)
                for (int c = 0; c < 3; ++c) {
                    const double x = std::log(pred.data()[px * 3 + c]);
                    const double y = std::log(target.data()[px * 3 + c]);
                    const double fit = a[c][0] + x * (a[c][1] + x * (a[c][2] + x * a[c][3]));
                    fit_err += (fit - y) * (fit - y);
                    id_err += (x - y) * (x - y);
                }
            REQUIRE(fit_err <= id_err * (1.0 + 1e-12) + 1e-12);
        }
    }
}

TEST_CASE("pu21 encode") {
    SECTION("matches the reference implementation at ten luminances") {
        // Reference values computed with the published banding_glare
        // coefficients through the reference formula in double precision.
        const std::pair<double, double> reference[10] = {
            {0.005, 5.470456654038225e-10},
            {0.01, 0.3722322097176101},
            {0.1, 5.717073839669447},
            {1.0, 36.5439111394192},
            {10.0, 123.64748355384738},
            {100.0, 256.3838973127039},
            {500.0, 368.0802597550465},
            {1000.0, 420.0969213492443},
            {5000.0, 544.5649765946748},
            {10000.0, 595.393920020095},
        };
        for (const auto& [y, expect] : reference) {
            const double got = pu21_encode_value(y);
            REQUIRE(std::fabs(got - expect) <= 1e-4 * std::max(std::fabs(expect), 1e-9));
        }
    }
    SECTION("strictly monotone over the valid domain") {
        double prev = -1.0;
        for (int i = 0; i <= 400; ++i) {
            const double y = pu21::kLuminanceMin *
                             std::pow(pu21::kLuminanceMax / pu21::kLuminanceMin, i / 400.0);
            const double v = pu21_encode_value(y);
            REQUIRE(v > prev);
            prev = v;
        }
    }
    SECTION("out-of-domain values clamp and raise the flag") {
        Image img(1, 2, 1);
        img.at(0, 0, 0) = 0.0001; // below L_min
        img.at(0, 1, 0) = 20000.0;
        Pu21Result r = pu21_encode(img);
        REQUIRE(r.clamped);
        REQUIRE(r.encoded.at(0, 0, 0) == pu21_encode_value(pu21::kLuminanceMin));
        REQUIRE(r.encoded.at(0, 1, 0) == pu21_encode_value(pu21::kLuminanceMax));
        Image inside(1, 1, 1, 50.0);
        REQUIRE_FALSE(pu21_encode(inside).clamped);
    }
}

TEST_CASE("full evaluation protocol") {
    Rng rng(4);
    Image gt = test_util::random_image(rng, 16, 16, 3, 0.01, 5.0);

    SECTION("identity prediction: infinite PSNR, zero RMSE") {
        EvalReport r = evaluate(gt, gt, "identity");
        REQUIRE(std::isinf(r.pu21_psnr));
        REQUIRE(r.rmse_linear <= 1e-9);
        // the alignment scale is the range-mapping factor itself
        REQUIRE_THAT(r.scale, Catch::Matchers::WithinRel(1000.0 / max_value(gt), 1e-9));
    }
    SECTION("doubled prediction is absorbed by alignment") {
        Image doubled(16, 16, 3);
        for (std::size_t i = 0; i < gt.size(); ++i) doubled.data()[i] = 2.0 * gt.data()[i];
        EvalReport r = evaluate(doubled, gt);
        REQUIRE(std::isinf(r.pu21_psnr));
        REQUIRE(r.rmse_linear <= 1e-9);
    }
    SECTION("protocol is invariant to global prediction scaling") {
        Image pred = test_util::random_image(rng, 16, 16, 3, 0.01, 5.0);
        EvalReport base = evaluate(pred, gt);
        for (double k : {0.125, 3.0, 817.0}) {
            Image scaled(16, 16, 3);
            for (std::size_t i = 0; i < pred.size(); ++i) scaled.data()[i] = k * pred.data()[i];
            EvalReport r = evaluate(scaled, gt);
            REQUIRE_THAT(r.pu21_psnr, Catch::Matchers::WithinAbs(base.pu21_psnr, 1e-9));
            REQUIRE(std::fabs(r.rmse_linear - base.rmse_linear) <=
                    1e-9 * std::max(1.0, base.rmse_linear));
        }
    }
    SECTION("CRF correction reduces the RMSE of a gamma-distorted prediction") {
        Image pred(16, 16, 3);
        for (std::size_t i = 0; i < gt.size(); ++i)
            pred.data()[i] = std::pow(gt.data()[i], 1.0 / 2.2);
        const Image gt_ranged = map_to_range(gt);
        const double s = align_scale(pred, gt_ranged);
        double pre_se = 0.0;
        for (std::size_t i = 0; i < gt.size(); ++i) {
            const double d = s * pred.data()[i] - gt_ranged.data()[i];
            pre_se += d * d;
        }
        const double pre_rmse = std::sqrt(pre_se / static_cast<double>(gt.size()));
        EvalReport r = evaluate(pred, gt);
        REQUIRE(r.rmse_linear < pre_rmse);
    }
}
