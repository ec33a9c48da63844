#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "ihdr/autodiff.hpp"
#include "ihdr/intrinsic.hpp"

namespace ihdr {

// gamma weights the multi-scale gradient terms against the MSE terms.
// msg_scales is the requested pyramid depth; the composite losses clamp it to
// what the instance dimensions support so small test crops stay legal.
struct LossWeights {
    double gamma = 0.1;
    int msg_scales = 4;
};

namespace ad_losses_detail {
inline int feasible_msg_scales(const std::vector<int>& shape, int requested) {
    const int m = std::min(shape[1], shape[2]);
    int scales = 1;
    while (scales < requested && (1 << scales) <= m) ++scales;
    return scales;
}
} // namespace ad_losses_detail

// Mean of squared differences over all elements.
inline ad::Var mse(ad::Tape& t, ad::Var pred, ad::Var target) {
    ad::Var d = t.sub(pred, target);
    return t.mean(t.mul(d, d));
}

// Multi-scale gradient loss: sum of absolute forward-difference mismatches
// over a pyramid of 2x average-pooled scales, divided by the total number of
// accumulated gradient elements, so the result is a true mean.
inline ad::Var msg(ad::Tape& t, ad::Var pred, ad::Var target, int scales) {
    if (scales < 1) throw InvalidArgument("msg: scales must be >= 1");
    const std::vector<int>& shape = pred.shape();
    if (shape != target.shape()) throw InvalidArgument("msg: shape mismatch");
    const int need = 1 << (scales - 1);
    if (shape[1] < need || shape[2] < need) throw InvalidArgument("image too small");

    ad::Var total;
    std::size_t count = 0;
    ad::Var p = pred;
    ad::Var q = target;
    for (int m = 0; m < scales; ++m) {
        if (m > 0) {
            p = t.avg_pool2(p);
            q = t.avg_pool2(q);
        }
        ad::Var dx = t.abs(t.sub(t.grad_x(p), t.grad_x(q)));
        ad::Var dy = t.abs(t.sub(t.grad_y(p), t.grad_y(q)));
        ad::Var level = t.add(t.sum(dx), t.sum(dy));
        total = total.valid() ? t.add(total, level) : level;
        count += 2 * p.size();
    }
    return t.mul_const(total, 1.0 / static_cast<double>(count));
}

namespace ad_losses_detail {

// (1 - D) / D, clamped below by the shared division guard.
inline ad::Var shading_from_inverse(ad::Tape& t, ad::Var d) {
    return t.clamp_min(t.div(t.rsub_const(1.0, d), d), kEpsilon);
}

// Broadcasts a 1-channel tensor to n channels.
inline ad::Var repeat_channels(ad::Tape& t, ad::Var x, int n) {
    if (n == 1) return x;
    std::vector<ad::Var> parts(static_cast<std::size_t>(n), x);
    return t.concat_channels(parts);
}

// Mean over channels as a 1x1 convolution with fixed 1/C weights.
inline ad::Var channel_mean(ad::Tape& t, ad::Var x) {
    const int c = x.shape()[0];
    ad::Var w = t.constant({1, c, 1, 1}, std::vector<double>(c, 1.0 / c));
    return t.conv2d(x, w, ad::Var());
}

} // namespace ad_losses_detail

// Shading-stage loss: inverse-shading fit plus the fit of the albedo implied
// by the prediction and the ground-truth HDR image. Gradients flow through
// the implied-albedo construction.
inline ad::Var loss_shading(ad::Tape& t, ad::Var d_pred, ad::Var d_gt, ad::Var i_gt_hdr,
                            ad::Var a_gt, const LossWeights& w) {
    using namespace ad_losses_detail;
    if (d_pred.shape() != d_gt.shape()) throw InvalidArgument("loss_shading: shape mismatch");
    ad::Var s = shading_from_inverse(t, d_pred);
    ad::Var implied = t.div(i_gt_hdr, repeat_channels(t, s, i_gt_hdr.shape()[0]));
    ad::Var loss = t.add(mse(t, d_pred, d_gt), mse(t, implied, a_gt));
    if (w.gamma != 0.0) {
        const int scales = feasible_msg_scales(d_pred.shape(), w.msg_scales);
        ad::Var g = t.add(msg(t, d_pred, d_gt, scales), msg(t, implied, a_gt, scales));
        loss = t.add(loss, t.mul_const(g, w.gamma));
    }
    return loss;
}

// Albedo-stage loss: albedo fit plus the fit of the inverse shading implied
// by the prediction and the ground-truth HDR image.
inline ad::Var loss_albedo(ad::Tape& t, ad::Var a_pred, ad::Var a_gt, ad::Var i_gt_hdr,
                           ad::Var d_gt, const LossWeights& w) {
    using namespace ad_losses_detail;
    if (a_pred.shape() != a_gt.shape()) throw InvalidArgument("loss_albedo: shape mismatch");
    ad::Var ratio = t.div(a_pred, t.add_const(t.add(i_gt_hdr, a_pred), kEpsilon));
    ad::Var implied_d = channel_mean(t, ratio);
    ad::Var loss = t.add(mse(t, a_pred, a_gt), mse(t, implied_d, d_gt));
    if (w.gamma != 0.0) {
        const int scales = feasible_msg_scales(a_pred.shape(), w.msg_scales);
        ad::Var g = t.add(msg(t, a_pred, a_gt, scales), msg(t, implied_d, d_gt, scales));
        loss = t.add(loss, t.mul_const(g, w.gamma));
    }
    return loss;
}

// Refinement-stage loss on inverse HDR images.
inline ad::Var loss_refine(ad::Tape& t, ad::Var j_pred, ad::Var j_gt, const LossWeights& w) {
    using namespace ad_losses_detail;
    if (j_pred.shape() != j_gt.shape()) throw InvalidArgument("loss_refine: shape mismatch");
    ad::Var loss = mse(t, j_pred, j_gt);
    if (w.gamma != 0.0) {
        const int scales = feasible_msg_scales(j_pred.shape(), w.msg_scales);
        loss = t.add(loss, t.mul_const(msg(t, j_pred, j_gt, scales), w.gamma));
    }
    return loss;
}

// Central-difference verification of reverse-mode gradients. f must build a
// scalar from the given leaf on the supplied tape. Returns the maximum over
// coordinates of |fd - ad| / max(|fd|, |ad|, 1e-8).
inline double grad_check(const std::function<ad::Var(ad::Tape&, ad::Var)>& f,
                         const std::vector<int>& shape, const std::vector<double>& x0, double h) {
    if (!(h >= 1e-6 && h <= 1e-3))
        throw InvalidArgument("grad_check: step must be in [1e-6, 1e-3]");

    ad::Tape tape;
    ad::Var x = tape.leaf(shape, x0);
    ad::Var y = f(tape, x);
    if (y.size() != 1) throw InvalidArgument("grad_check: f must produce a scalar");
    if (!std::isfinite(y.scalar())) throw NumericalError("grad_check: non-finite evaluation");
    tape.backward(y);
    const std::vector<double> analytic = x.grad();

    const auto eval = [&](const std::vector<double>& point) {
        ad::Tape t2;
        ad::Var v = f(t2, t2.leaf(shape, point));
        const double val = v.scalar();
        if (!std::isfinite(val)) throw NumericalError("grad_check: non-finite evaluation");
        return val;
    };

    double max_rel = 0.0;
    std::vector<double> probe = x0;
    for (std::size_t i = 0; i < x0.size(); ++i) {
        probe[i] = x0[i] + h;
        const double fp = eval(probe);
        probe[i] = x0[i] - h;
        const double fm = eval(probe);
        probe[i] = x0[i];
        const double fd = (fp - fm) / (2.0 * h);
        const double rel =
            std::fabs(fd - analytic[i]) / std::max({std::fabs(fd), std::fabs(analytic[i]), 1e-8});
        max_rel = std::max(max_rel, rel);
    }
    return max_rel;
}

} // namespace ihdr
