#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "ihdr/autodiff.hpp"
#include "ihdr/rng.hpp"

namespace ihdr {

enum class NetRole : std::uint32_t { shading = 0, albedo = 1, refinement = 2 };

// Input stacks: shading sees I_L + D_L, albedo sees I_L + A_L + saturation
// mask, refinement sees I_L + inferred inverse HDR + D_H + A_H.
inline constexpr int input_channels(NetRole role) {
    switch (role) {
    case NetRole::shading: return 4;
    case NetRole::albedo: return 7;
    case NetRole::refinement: return 10;
    }
    throw InvalidArgument("net: unknown role");
}

inline constexpr int output_channels(NetRole role) {
    return role == NetRole::shading ? 1 : 3;
}

inline const char* role_name(NetRole role) {
    switch (role) {
    case NetRole::shading: return "shading";
    case NetRole::albedo: return "albedo";
    case NetRole::refinement: return "refinement";
    }
    return "?";
}

inline NetRole role_from_name(const std::string& name) {
    if (name == "shading") return NetRole::shading;
    if (name == "albedo") return NetRole::albedo;
    if (name == "refinement") return NetRole::refinement;
    throw InvalidArgument("net: unknown role '" + name + "'");
}

struct ParamTensor {
    std::string name;
    std::vector<int> shape;
    std::vector<double> values;

    std::size_t count() const {
        std::size_t n = 1;
        for (int d : shape) n *= static_cast<std::size_t>(d);
        return n;
    }
};

// Two-pool encoder-decoder with skip connections: widths 16/32/64, 3x3
// convolutions, clamp-at-zero activations, sigmoid head. Output dims equal
// input dims; inputs must be divisible by 4.
//
// The head is residual in the inverse domain: the sigmoid receives the
// trunk's output plus the logit of the stage's LDR base. For the shading and
// albedo stages the base is the D_L / A_L plane of the input stack; for the
// refinement stage it is the inverse-mapped LDR image 1/(I_L+1), which is
// exact up to quantization wherever nothing clipped. A freshly initialized
// network therefore reproduces its base almost exactly, and training only
// has to learn the deviation, which is what separates clipped regions from
// the identity elsewhere.
class ToyNet {
    struct ConvSpec {
        const char* name;
        int in_ch;
        int out_ch;
    };

    static std::array<ConvSpec, 7> layer_specs(NetRole role) {
        const int in = input_channels(role);
        const int out = output_channels(role);
        return {{{"enc1a", in, 16},
                 {"enc1b", 16, 16},
                 {"enc2", 16, 32},
                 {"bottleneck", 32, 64},
                 {"dec2", 96, 32},
                 {"dec1", 48, 16},
                 {"head", 16, out}}};
    }

public:
    static constexpr int kDownsamplings = 2;
    static constexpr int kDimMultiple = 1 << kDownsamplings;

    // He fan-in initialization for the trunk. The head gets the same shape
    // of init scaled way down, so an untrained network emits values near 0.5
    // and the first optimizer steps see moderate gradients, while gradient
    // flow into every layer stays alive from step one.
    static constexpr double kHeadInitScale = 0.01;

    static ToyNet build(NetRole role, std::uint64_t seed) {
        ToyNet net;
        net.role_ = role;
        Rng rng(seed);
        const auto specs = layer_specs(role);
        for (std::size_t li = 0; li < specs.size(); ++li) {
            const ConvSpec& spec = specs[li];
            const bool head = li + 1 == specs.size();
            ParamTensor w;
            w.name = std::string(spec.name) + ".weight";
            w.shape = {spec.out_ch, spec.in_ch, 3, 3};
            w.values.resize(w.count());
            const double stddev =
                std::sqrt(2.0 / (spec.in_ch * 9.0)) * (head ? kHeadInitScale : 1.0);
            for (double& v : w.values) v = stddev * rng.normal();
            ParamTensor b;
            b.name = std::string(spec.name) + ".bias";
            b.shape = {spec.out_ch};
            b.values.assign(static_cast<std::size_t>(spec.out_ch), 0.0);
            net.params_.push_back(std::move(w));
            net.params_.push_back(std::move(b));
        }
        return net;
    }

    NetRole role() const { return role_; }
    const std::vector<ParamTensor>& parameters() const { return params_; }
    std::vector<ParamTensor>& parameters() { return params_; }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const ParamTensor& p : params_) n += p.count();
        return n;
    }

    // Registers the parameter tensors on the tape, as differentiable leaves
    // for training or plain constants for inference.
    std::vector<ad::Var> register_parameters(ad::Tape& t, bool trainable) const {
        std::vector<ad::Var> vars;
        vars.reserve(params_.size());
        for (const ParamTensor& p : params_)
            vars.push_back(trainable ? t.leaf(p.shape, p.values) : t.constant(p.shape, p.values));
        return vars;
    }

    // Runs the network against previously registered parameter vars, so a
    // batch of forwards can share one set of leaves.
    ad::Var forward(ad::Tape& t, ad::Var input, const std::vector<ad::Var>& param_vars) const {
        const std::vector<int>& shape = input.shape();
        if (shape.size() != 3 || shape[0] != input_channels(role_))
            throw InvalidArgument(std::string("net: ") + role_name(role_) + " expects " +
                                  std::to_string(input_channels(role_)) + " input channels");
        if (shape[1] % kDimMultiple != 0 || shape[2] % kDimMultiple != 0)
            throw InvalidArgument("net: input dims must be divisible by 4");
        if (param_vars.size() != params_.size())
            throw InvalidArgument("net: parameter var count mismatch");

        const auto conv = [&](int layer, ad::Var x) {
            return t.conv2d(x, param_vars[2 * layer], param_vars[2 * layer + 1]);
        };
        const auto relu = [&](ad::Var x) { return t.clamp_min(x, 0.0); };

        ad::Var e1 = relu(conv(0, input));
        e1 = relu(conv(1, e1));
        ad::Var e2 = relu(conv(2, t.avg_pool2(e1)));
        ad::Var bottleneck = relu(conv(3, t.avg_pool2(e2)));
        ad::Var d2 = relu(conv(4, t.concat_channels({t.upsample2(bottleneck), e2})));
        ad::Var d1 = relu(conv(5, t.concat_channels({t.upsample2(d2), e1})));
        return t.sigmoid(t.add(conv(6, d1), base_logit(t, input)));
    }

    ad::Var forward(ad::Tape& t, ad::Var input) const {
        return forward(t, input, register_parameters(t, false));
    }

    // First channel of the stage's base inside the input stack. Shading sees
    // I_L + D_L and albedo I_L + A_L + mask; their base starts right after
    // the three image channels. Refinement derives its base from the I_L
    // channels themselves.
    static constexpr int kBaseChannelOffset = 3;

    // Inference: concatenates the given planes into the input stack on a
    // private tape and returns the prediction as a plain image.
    Image infer(const std::vector<const Image*>& stack_parts) const {
        ad::Tape t;
        std::vector<ad::Var> parts;
        parts.reserve(stack_parts.size());
        for (const Image* img : stack_parts) parts.push_back(t.constant(*img));
        return t.to_image(forward(t, t.concat_channels(parts)));
    }

private:
    // Logit of the base channels, clamped away from 0 and 1, as a constant
    // tensor (the skip path carries data, not gradients).
    ad::Var base_logit(ad::Tape& t, ad::Var input) const {
        const std::vector<int>& shape = input.shape();
        const int out = output_channels(role_);
        const std::size_t plane = static_cast<std::size_t>(shape[1]) * shape[2];
        std::vector<double> logit(static_cast<std::size_t>(out) * plane);
        const std::vector<double>& in = input.value();
        constexpr double kDelta = 1e-4;
        for (std::size_t i = 0; i < logit.size(); ++i) {
            double v;
            if (role_ == NetRole::refinement) {
                v = 1.0 / (in[i] + 1.0); // inverse-mapped LDR channel
            } else {
                v = in[kBaseChannelOffset * plane + i];
            }
            v = std::clamp(v, kDelta, 1.0 - kDelta);
            logit[i] = std::log(v / (1.0 - v));
        }
        return t.constant({out, shape[1], shape[2]}, std::move(logit));
    }

    NetRole role_ = NetRole::shading;
    std::vector<ParamTensor> params_;
};

// ---------------------------------------------------------------------------
// Checkpoint format: "IHDRCKPT" magic, u32 version, u32 role tag, u32 layer
// count, then per tensor a u32 rank, u32 dims, and row-major float32 values.
// All integers and floats little-endian.
// ---------------------------------------------------------------------------

namespace ckpt_detail {

inline constexpr char kMagic[8] = {'I', 'H', 'D', 'R', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kVersion = 1;

inline void put_u32(std::ostream& os, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                                static_cast<unsigned char>((v >> 8) & 0xff),
                                static_cast<unsigned char>((v >> 16) & 0xff),
                                static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(std::istream& is, long long& offset) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw ParseError("checkpoint: truncated", offset);
    offset += 4;
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void put_f32(std::ostream& os, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(os, bits);
}

inline float get_f32(std::istream& is, long long& offset) {
    const std::uint32_t bits = get_u32(is, offset);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

} // namespace ckpt_detail

inline void save_checkpoint(const std::filesystem::path& path, const ToyNet& net) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ParseError("checkpoint: cannot open '" + path.string() + "' for writing");
    os.write(ckpt_detail::kMagic, 8);
    ckpt_detail::put_u32(os, ckpt_detail::kVersion);
    ckpt_detail::put_u32(os, static_cast<std::uint32_t>(net.role()));
    ckpt_detail::put_u32(os, static_cast<std::uint32_t>(net.parameters().size()));
    for (const ParamTensor& p : net.parameters()) {
        ckpt_detail::put_u32(os, static_cast<std::uint32_t>(p.shape.size()));
        for (int d : p.shape) ckpt_detail::put_u32(os, static_cast<std::uint32_t>(d));
        for (double v : p.values) ckpt_detail::put_f32(os, static_cast<float>(v));
    }
    if (!os) throw ParseError("checkpoint: write failed for '" + path.string() + "'");
}

inline ToyNet load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ParseError("checkpoint: cannot open '" + path.string() + "'");
    long long offset = 0;
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, ckpt_detail::kMagic, 8) != 0)
        throw ParseError("checkpoint: bad magic", 0);
    offset = 8;
    const std::uint32_t version = ckpt_detail::get_u32(is, offset);
    if (version != ckpt_detail::kVersion)
        throw ParseError("checkpoint: unsupported version " + std::to_string(version), 8);
    const std::uint32_t role_tag = ckpt_detail::get_u32(is, offset);
    if (role_tag > 2) throw ParseError("checkpoint: bad role tag", offset - 4);
    const NetRole role = static_cast<NetRole>(role_tag);
    const std::uint32_t layers = ckpt_detail::get_u32(is, offset);

    // Start from a freshly built net so names and layer layout are canonical,
    // then overwrite every value from the file.
    ToyNet net = ToyNet::build(role, 0);
    if (layers != net.parameters().size())
        throw ParseError("checkpoint: layer count mismatch", offset - 4);
    for (ParamTensor& p : net.parameters()) {
        const std::uint32_t rank = ckpt_detail::get_u32(is, offset);
        if (rank != p.shape.size()) throw ParseError("checkpoint: tensor rank mismatch", offset - 4);
        for (int expect : p.shape) {
            const std::uint32_t d = ckpt_detail::get_u32(is, offset);
            if (d != static_cast<std::uint32_t>(expect))
                throw ParseError("checkpoint: tensor shape mismatch", offset - 4);
        }
        for (double& v : p.values) v = static_cast<double>(ckpt_detail::get_f32(is, offset));
    }
    return net;
}

} // namespace ihdr
