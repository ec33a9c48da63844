#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "ihdr/losses.hpp"
#include "ihdr/pipeline.hpp"

namespace ihdr {

struct TrainConfig {
    double learning_rate = 1e-4;
    int steps = 1;
    int batch = 1;
    std::uint64_t seed = 0;
    LossWeights weights{};

    void validate() const {
        if (!(learning_rate > 0.0)) throw InvalidArgument("train: learning rate must be positive");
        if (steps < 0) throw InvalidArgument("train: steps must be >= 0");
        if (batch < 1) throw InvalidArgument("train: batch must be >= 1");
    }
};

// One scene observed through the ISP, with every target the role losses can
// ask for. All HDR-side targets live in the exposed photometric frame
// (scaled by 2^t), so LDR input and HDR target share their scale and the
// networks never have to infer the exposure itself. The evaluation protocol
// is scale-invariant, so this choice does not touch the metrics.
struct TrainSample {
    std::vector<Image> inputs; // planes concatenated channelwise into the net input
    Image d_gt;                // 1ch inverse HDR shading target
    Image a_gt;                // 3ch HDR albedo target
    Image i_gt;                // 3ch HDR image target
    Image j_gt;                // 3ch inverse HDR image target
};

// Builds the training sample for a role. The refinement role runs the two
// frozen upstream networks to produce its intermediate input planes.
inline TrainSample make_sample(NetRole role, const SyntheticScene& scene, const IspParams& p,
                               const ToyNet* shading_net = nullptr,
                               const ToyNet* albedo_net = nullptr) {
    ReconstructionInputs rin = make_reconstruction_inputs(scene, p);
    const double gain = std::exp2(p.exposure_stops);

    const Image& s_scene = scene.shading_gt.image();
    Image d_gt(s_scene.height(), s_scene.width(), 1);
    for (std::size_t i = 0; i < s_scene.size(); ++i)
        d_gt.data()[i] = 1.0 / (gain * s_scene.data()[i] + 1.0);

    Image i_gt(s_scene.height(), s_scene.width(), 3);
    Image j_gt(s_scene.height(), s_scene.width(), 3);
    for (std::size_t i = 0; i < i_gt.size(); ++i) {
        i_gt.data()[i] = gain * scene.hdr_gt.data()[i];
        j_gt.data()[i] = 1.0 / (i_gt.data()[i] + 1.0);
    }
    Image a_gt = scene.albedo_gt.image();

    std::vector<Image> inputs;
    switch (role) {
    case NetRole::shading:
        inputs = {rin.ldr_linear, rin.d_ldr};
        break;
    case NetRole::albedo:
        inputs = {rin.ldr_linear, rin.a_ldr, rin.mask};
        break;
    case NetRole::refinement: {
        if (!shading_net || !albedo_net)
            throw InvalidArgument("make_sample: refinement needs the upstream networks");
        Image d_hdr = shading_net->infer({&rin.ldr_linear, &rin.d_ldr});
        Image a_hdr = albedo_net->infer({&rin.ldr_linear, &rin.a_ldr, &rin.mask});
        Image initial = combine_intrinsics(AlbedoMap(a_hdr), InverseShadingMap(d_hdr));
        Image j_initial = image_to_inverse(initial).image();
        inputs = {rin.ldr_linear, std::move(j_initial), std::move(d_hdr), std::move(a_hdr)};
        break;
    }
    }
    return {std::move(inputs), std::move(d_gt), std::move(a_gt), std::move(i_gt), std::move(j_gt)};
}

// Composite loss for a role's prediction against one sample's targets.
inline ad::Var role_loss(ad::Tape& t, NetRole role, ad::Var pred, const TrainSample& s,
                         const LossWeights& w) {
    switch (role) {
    case NetRole::shading:
        return loss_shading(t, pred, t.constant(s.d_gt), t.constant(s.i_gt), t.constant(s.a_gt), w);
    case NetRole::albedo:
        return loss_albedo(t, pred, t.constant(s.a_gt), t.constant(s.i_gt), t.constant(s.d_gt), w);
    case NetRole::refinement:
        return loss_refine(t, pred, t.constant(s.j_gt), w);
    }
    throw InvalidArgument("role_loss: unknown role");
}

// RAdam (rectified Adam), implemented from the published update rule: Adam
// moments with a variance-rectification term, falling back to unadapted
// momentum SGD while the rectification is undefined (rho_t <= 4, the first
// four steps at beta2 = 0.999).
class RAdam {
public:
    explicit RAdam(const std::vector<std::size_t>& sizes, double beta1 = 0.9, double beta2 = 0.999)
        : beta1_(beta1), beta2_(beta2) {
        for (std::size_t n : sizes) {
            m_.emplace_back(n, 0.0);
            v_.emplace_back(n, 0.0);
        }
    }

    void step(double lr, std::vector<ParamTensor>& params,
              const std::vector<std::vector<double>>& grads) {
        if (params.size() != m_.size() || grads.size() != m_.size())
            throw InvalidArgument("radam: parameter group mismatch");
        ++t_;
        const double b1t = std::pow(beta1_, t_);
        const double b2t = std::pow(beta2_, t_);
        const double rho_inf = 2.0 / (1.0 - beta2_) - 1.0;
        const double rho_t = rho_inf - 2.0 * t_ * b2t / (1.0 - b2t);
        double rect = 0.0;
        const bool rectified = rho_t > 4.0;
        if (rectified)
            rect = std::sqrt(((rho_t - 4.0) * (rho_t - 2.0) * rho_inf) /
                             ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t));
        for (std::size_t gi = 0; gi < params.size(); ++gi) {
            std::vector<double>& m = m_[gi];
            std::vector<double>& v = v_[gi];
            std::vector<double>& p = params[gi].values;
            const std::vector<double>& g = grads[gi];
            if (p.size() != m.size() || g.size() != m.size())
                throw InvalidArgument("radam: gradient size mismatch");
            for (std::size_t i = 0; i < p.size(); ++i) {
                m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
                v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
                const double m_hat = m[i] / (1.0 - b1t);
                if (rectified) {
                    const double denom = std::sqrt(v[i] / (1.0 - b2t)) + kDenomEps;
                    p[i] -= lr * rect * m_hat / denom;
                } else {
                    p[i] -= lr * m_hat;
                }
            }
        }
    }

    int step_count() const { return t_; }

private:
    static constexpr double kDenomEps = 1e-12; // guards sqrt(v) at zero variance

    double beta1_;
    double beta2_;
    int t_ = 0;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
};

// Cosine annealing from lr to zero over the run; step_index counts from 0.
inline double cosine_lr(double lr, int step_index, int total_steps) {
    if (total_steps <= 0) return lr;
    return lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * static_cast<double>(step_index) /
                                      static_cast<double>(total_steps)));
}

struct TrainResult {
    std::vector<double> loss_curve; // one entry per optimizer step
};

// Mean composite loss over a whole dataset at the current parameters; the
// low-variance measure for before/after training comparisons.
inline double dataset_loss(const ToyNet& net, const std::vector<TrainSample>& data,
                           const LossWeights& w = LossWeights{}) {
    if (data.empty()) throw InvalidArgument("dataset_loss: empty dataset");
    double total = 0.0;
    for (const TrainSample& s : data) {
        ad::Tape t;
        std::vector<ad::Var> planes;
        planes.reserve(s.inputs.size());
        for (const Image& img : s.inputs) planes.push_back(t.constant(img));
        ad::Var pred = net.forward(t, t.concat_channels(planes));
        total += role_loss(t, net.role(), pred, s, w).scalar();
    }
    return total / static_cast<double>(data.size());
}

// Runs cfg.steps RAdam steps on the role's composite loss. Batch items are
// drawn uniformly from the dataset with a generator seeded by cfg.seed, so a
// fixed (seed, dataset, config) triple reproduces the loss curve bit for bit.
inline TrainResult train(ToyNet& net, const std::vector<TrainSample>& data,
                         const TrainConfig& cfg) {
    cfg.validate();
    if (data.empty()) throw InvalidArgument("train: empty dataset");

    std::vector<std::size_t> sizes;
    for (const ParamTensor& p : net.parameters()) sizes.push_back(p.count());
    RAdam opt(sizes);
    Rng rng(cfg.seed);
    TrainResult result;
    result.loss_curve.reserve(static_cast<std::size_t>(cfg.steps));

    for (int step = 0; step < cfg.steps; ++step) {
        ad::Tape tape;
        std::vector<ad::Var> pvars = net.register_parameters(tape, true);
        ad::Var total;
        for (int b = 0; b < cfg.batch; ++b) {
            const TrainSample& s = data[static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<int>(data.size()) - 1))];
            std::vector<ad::Var> planes;
            planes.reserve(s.inputs.size());
            for (const Image& img : s.inputs) planes.push_back(tape.constant(img));
            ad::Var pred = net.forward(tape, tape.concat_channels(planes), pvars);
            ad::Var item = role_loss(tape, net.role(), pred, s, cfg.weights);
            total = total.valid() ? tape.add(total, item) : item;
        }
        if (cfg.batch > 1) total = tape.mul_const(total, 1.0 / cfg.batch);

        const double loss_value = total.scalar();
        if (!std::isfinite(loss_value))
            throw NumericalError("train: non-finite loss at step " + std::to_string(step) +
                                 " (role " + role_name(net.role()) + ")");
        tape.backward(total);

        std::vector<std::vector<double>> grads;
        grads.reserve(pvars.size());
        for (const ad::Var& pv : pvars) grads.push_back(pv.grad());
        opt.step(cosine_lr(cfg.learning_rate, step, cfg.steps), net.parameters(), grads);
        result.loss_curve.push_back(loss_value);
    }
    return result;
}

} // namespace ihdr
