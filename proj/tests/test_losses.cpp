#include <catch2/catch_amalgamated.hpp>

#include "ihdr/image.hpp"
#include "ihdr/gradcheck_suite.hpp"
#include "ihdr/losses.hpp"
#include "test_util.hpp"

using namespace ihdr;
namespace ad = ihdr::ad;

namespace {

// Independent multi-scale gradient oracle built on the plain image ops
// rather than the tape.
double msg_oracle(const Image& pred, const Image& target, int scales) {
    double sad = 0.0;
    std::size_t count = 0;
    Image p = pred;
    Image q = target;
    for (int m = 0; m < scales; ++m) {
        if (m > 0) {
            p = downsample_half(p);
            q = downsample_half(q);
        }
        auto [pgx, pgy] = spatial_gradient(p);
        auto [qgx, qgy] = spatial_gradient(q);
        for (std::size_t i = 0; i < pgx.size(); ++i) {
            sad += std::fabs(pgx.data()[i] - qgx.data()[i]);
            sad += std::fabs(pgy.data()[i] - qgy.data()[i]);
        }
        count += 2 * p.size();
    }
    return sad / static_cast<double>(count);
}

double tape_msg(const Image& pred, const Image& target, int scales) {
    ad::Tape t;
    return msg(t, t.constant(pred), t.constant(target), scales).scalar();
}

} // namespace

TEST_CASE("mse") {
    SECTION("identical inputs") {
        ad::Tape t;
        ad::Var a = t.leaf({1, 2, 2}, {1, 2, 3, 4});
        ad::Var b = t.constant({1, 2, 2}, {1, 2, 3, 4});
        REQUIRE(mse(t, a, b).scalar() == 0.0);
    }
    SECTION("single element value and gradient") {
        ad::Tape t;
        ad::Var a = t.leaf({1}, {0.7});
        ad::Var b = t.constant({1}, {0.2});
        ad::Var l = mse(t, a, b);
        REQUIRE_THAT(l.scalar(), Catch::Matchers::WithinRel(0.25, 1e-15));
        t.backward(l);
        REQUIRE_THAT(a.grad()[0], Catch::Matchers::WithinRel(1.0, 1e-15));
    }
    SECTION("direct substitution") {
        ad::Tape t;
        ad::Var a = t.leaf({1, 1, 2}, {1, 3});
        ad::Var b = t.constant({1, 1, 2}, {0, 0});
        REQUIRE(mse(t, a, b).scalar() == 5.0);
    }
    SECTION("shape mismatch") {
        ad::Tape t;
        ad::Var a = t.leaf({1, 2, 2}, {1, 2, 3, 4});
        ad::Var b = t.leaf({1, 1, 2}, {1, 2});
        REQUIRE_THROWS_AS(mse(t, a, b), InvalidArgument);
    }
}

TEST_CASE("msg") {
    SECTION("hand-computed 2x2 instance is exactly one quarter") {
        Image pred = Image::from_data(2, 2, 1, {0, 1, 0, 1});
        Image target(2, 2, 1, 0.0);
        REQUIRE(tape_msg(pred, target, 1) == 0.25);
    }
    SECTION("identical images") {
        Rng rng(3);
        Image img = test_util::random_image(rng, 8, 8, 3, 0.0, 1.0);
        REQUIRE(tape_msg(img, img, 4) == 0.0);
    }
    SECTION("constant offsets are invisible") {
        // Exact on dyadic values, where every sum is representable.
        Rng rng(5);
        Image a(8, 8, 1);
        for (double& v : a.data()) v = rng.uniform_int(0, 255) / 64.0;
        Image b = a;
        for (double& v : b.data()) v += 0.375;
        REQUIRE(tape_msg(a, b, 3) == 0.0);
        Image c = a;
        for (double& v : c.data()) v += 100.0;
        REQUIRE(tape_msg(c, a, 3) == 0.0);
        // Within an ulp-sized budget on arbitrary reals.
        Image r = test_util::random_image(rng, 8, 8, 1, 0.0, 1.0);
        Image r2 = r;
        for (double& v : r2.data()) v += 0.37;
        REQUIRE(tape_msg(r, r2, 3) < 1e-15);
    }
    SECTION("matches the brute-force oracle on random instances") {
        Rng rng(11);
        for (int trial = 0; trial < 10; ++trial) {
            const int h = 8 + 2 * rng.uniform_int(0, 4);
            const int w = 8 + 2 * rng.uniform_int(0, 4);
            Image a = test_util::random_image(rng, h, w, 3, 0.0, 2.0);
            Image b = test_util::random_image(rng, h, w, 3, 0.0, 2.0);
            for (int scales = 1; scales <= 4; ++scales) {
                const double expect = msg_oracle(a, b, scales);
                REQUIRE_THAT(tape_msg(a, b, scales), Catch::Matchers::WithinRel(expect, 1e-12));
            }
        }
    }
    SECTION("too small for the requested scales") {
        ad::Tape t;
        Image small(4, 4, 1, 0.0);
        REQUIRE_THROWS_WITH(msg(t, t.constant(small), t.constant(small), 4), "image too small");
    }
}

TEST_CASE("loss_shading") {
    SECTION("zero at the global minimum") {
        // S = 1 everywhere, so the implied albedo equals I itself.
        Image d(4, 4, 1, 0.5);
        Image a(4, 4, 3, 0.4);
        Image i = a; // I = A * S with S = 1
        ad::Tape t;
        ad::Var loss =
            loss_shading(t, t.leaf(d), t.constant(d), t.constant(i), t.constant(a), LossWeights{});
        REQUIRE(loss.scalar() == 0.0);
    }
    SECTION("gamma zero reduces to the two mse terms") {
        Rng rng(17);
        Image d_pred = test_util::random_image(rng, 4, 4, 1, 0.2, 0.8);
        Image d_gt = test_util::random_image(rng, 4, 4, 1, 0.2, 0.8);
        Image i_gt = test_util::random_image(rng, 4, 4, 3, 0.0, 3.0);
        Image a_gt = test_util::random_image(rng, 4, 4, 3, 0.0, 1.0);
        ad::Tape t;
        ad::Var loss = loss_shading(t, t.leaf(d_pred), t.constant(d_gt), t.constant(i_gt),
                                    t.constant(a_gt), LossWeights{0.0, 4});
        // reference: mse(D) + mse(implied albedo)
        double ref = 0.0;
        {
            ad::Tape t2;
            ad::Var dp = t2.constant(d_pred);
            ref += mse(t2, dp, t2.constant(d_gt)).scalar();
            InverseShadingMap dmap(d_pred);
            AlbedoMap implied = implied_albedo(i_gt, dmap);
            ref += mse(t2, t2.constant(implied.image()), t2.constant(a_gt)).scalar();
        }
        REQUIRE_THAT(loss.scalar(), Catch::Matchers::WithinRel(ref, 1e-12));
    }
    SECTION("hand-evaluated 2x2 instance") {
        Image d_pred(2, 2, 1, 0.5);
        Image d_gt(2, 2, 1, 0.25);
        Image i_gt(2, 2, 3, 1.0);
        Image a_gt(2, 2, 3, 1.0 / 3.0);
        ad::Tape t;
        ad::Var loss = loss_shading(t, t.leaf(d_pred), t.constant(d_gt), t.constant(i_gt),
                                    t.constant(a_gt), LossWeights{0.0, 4});
        REQUIRE_THAT(loss.scalar(), Catch::Matchers::WithinRel(0.0625 + 4.0 / 9.0, 1e-14));
    }
}

TEST_CASE("loss_albedo") {
    SECTION("zero at the global minimum") {
        Image a(4, 4, 3, 0.4);
        Image i(4, 4, 3, 0.4);
        // D_gt constructed from the guarded ratio itself.
        Image d(4, 4, 1, 0.4 / (0.8 + kEpsilon));
        ad::Tape t;
        ad::Var loss =
            loss_albedo(t, t.leaf(a), t.constant(a), t.constant(i), t.constant(d), LossWeights{});
        REQUIRE(loss.scalar() < 1e-25);
    }
    SECTION("gamma zero reduces to the two mse terms") {
        Rng rng(23);
        Image a_pred = test_util::random_image(rng, 4, 4, 3, 0.1, 0.9);
        Image a_gt = test_util::random_image(rng, 4, 4, 3, 0.1, 0.9);
        Image i_gt = test_util::random_image(rng, 4, 4, 3, 0.1, 3.0);
        Image d_gt = test_util::random_image(rng, 4, 4, 1, 0.2, 0.8);
        ad::Tape t;
        ad::Var loss = loss_albedo(t, t.leaf(a_pred), t.constant(a_gt), t.constant(i_gt),
                                   t.constant(d_gt), LossWeights{0.0, 4});
        double ref = 0.0;
        {
            ad::Tape t2;
            ref += mse(t2, t2.constant(a_pred), t2.constant(a_gt)).scalar();
            InverseShadingMap implied = implied_inverse_shading(AlbedoMap(a_pred), i_gt);
            ref += mse(t2, t2.constant(implied.image()), t2.constant(d_gt)).scalar();
        }
        REQUIRE_THAT(loss.scalar(), Catch::Matchers::WithinRel(ref, 1e-12));
    }
    SECTION("albedo equal to the image drives implied inverse shading to one half") {
        Image a(4, 4, 3, 0.6);
        Image i = a;
        Image d_gt(4, 4, 1, 0.3);
        ad::Tape t;
        ad::Var loss = loss_albedo(t, t.leaf(a), t.constant(a), t.constant(i), t.constant(d_gt),
                                   LossWeights{0.0, 4});
        REQUIRE_THAT(loss.scalar(), Catch::Matchers::WithinAbs((0.5 - 0.3) * (0.5 - 0.3), 1e-5));
    }
}

TEST_CASE("loss_refine") {
    SECTION("identical inputs") {
        Rng rng(31);
        Image j = test_util::random_image(rng, 8, 8, 3, 0.1, 0.9);
        ad::Tape t;
        REQUIRE(loss_refine(t, t.leaf(j), t.constant(j), LossWeights{}).scalar() == 0.0);
    }
    SECTION("constant offset leaves only the mse term") {
        Rng rng(37);
        Image j = test_util::random_image(rng, 8, 8, 3, 0.1, 0.5);
        Image shifted = j;
        for (double& v : shifted.data()) v += 0.2;
        ad::Tape t;
        ad::Var loss = loss_refine(t, t.leaf(shifted), t.constant(j), LossWeights{});
        REQUIRE_THAT(loss.scalar(), Catch::Matchers::WithinRel(0.2 * 0.2, 1e-12));
    }
    SECTION("2x2 instance against hand summation") {
        Image pred = Image::from_data(2, 2, 3, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6,
                                                0.7, 0.8, 0.9, 0.2, 0.4, 0.6});
        Image target(2, 2, 3, 0.5);
        double m = 0.0;
        for (std::size_t i = 0; i < pred.size(); ++i) {
            const double d = pred.data()[i] - 0.5;
            m += d * d;
        }
        m /= static_cast<double>(pred.size());
        // A 2x2 image supports two pyramid levels; the losses clamp the
        // requested four down to that.
        ad::Tape t;
        ad::Var loss = loss_refine(t, t.leaf(pred), t.constant(target), LossWeights{});
        REQUIRE_THAT(loss.scalar(),
                     Catch::Matchers::WithinRel(m + 0.1 * msg_oracle(pred, target, 2), 1e-12));
        ad::Tape t1;
        ad::Var loss1 = loss_refine(t1, t1.leaf(pred), t1.constant(target), LossWeights{0.1, 1});
        REQUIRE_THAT(loss1.scalar(),
                     Catch::Matchers::WithinRel(m + 0.1 * msg_oracle(pred, target, 1), 1e-12));
    }
}

TEST_CASE("composite loss gradients match finite differences") {
    // Smoothness-screened instances; see gradcheck_suite.hpp for the
    // instance rules that keep central differences a valid oracle.
    for (const GradCheckCase& c : run_gradcheck_suite(2024, 2)) {
        INFO(c.name);
        REQUIRE(c.max_rel_err < 1e-5);
    }
}

TEST_CASE("composite losses are nonnegative and deterministic") {
    Rng rng(43);
    for (int trial = 0; trial < 10; ++trial) {
        Image d_pred = test_util::random_image(rng, 8, 8, 1, 0.1, 0.9);
        Image d_gt = test_util::random_image(rng, 8, 8, 1, 0.1, 0.9);
        Image i_gt = test_util::random_image(rng, 8, 8, 3, 0.0, 4.0);
        Image a_gt = test_util::random_image(rng, 8, 8, 3, 0.0, 1.0);
        const auto run = [&]() {
            ad::Tape t;
            return loss_shading(t, t.constant(d_pred), t.constant(d_gt), t.constant(i_gt),
                                t.constant(a_gt), LossWeights{})
                .scalar();
        };
        const double v = run();
        REQUIRE(v >= 0.0);
        REQUIRE(run() == v);
    }
}
