#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "ihdr/errors.hpp"
#include "ihdr/image.hpp"

// Reverse-mode automatic differentiation on a flat tape.
//
// Activations are C x H x W tensors, convolution weights Cout x Cin x kh x kw,
// biases Cout, reductions produce scalars of shape {1}. A tape is built
// forward (append-only, so node ids are already a topological order), then
// backward() seeds the root with 1 and accumulates adjoints in reverse id
// order. All reductions and accumulations run in a fixed left-to-right
// element order, so loss values and gradients are bit-reproducible.
//
// A tape is single-threaded; run concurrent work on separate tapes.

namespace ihdr::ad {

// Sign-preserving denominator / pow-base guard.
inline constexpr double kGradEpsilon = 1e-12;

namespace detail {
inline double guard(double v) {
    if (v > kGradEpsilon || v < -kGradEpsilon) return v;
    return v < 0.0 ? -kGradEpsilon : kGradEpsilon;
}
} // namespace detail

class Tape;

class Var {
public:
    Var() : tape_(nullptr), id_(-1) {}
    Var(Tape* tape, int id) : tape_(tape), id_(id) {}

    const std::vector<int>& shape() const;
    const std::vector<double>& value() const;
    const std::vector<double>& grad() const;
    std::size_t size() const { return value().size(); }
    double scalar() const {
        if (value().size() != 1) throw InvalidArgument("ad: tensor is not a scalar");
        return value()[0];
    }

    Tape* tape() const { return tape_; }
    int id() const { return id_; }
    bool valid() const { return tape_ != nullptr; }

private:
    Tape* tape_;
    int id_;
};

class Tape {
    enum class Op {
        Leaf,
        Add,
        Sub,
        Mul,
        Div,
        PowK,
        ClampMinK,
        Abs,
        Sigmoid,
        Mean,
        Sum,
        AddK,
        MulK,
        RsubK,
        GradX,
        GradY,
        AvgPool2,
        Upsample2,
        Concat,
        Conv2d
    };

    struct Node {
        Op op;
        std::vector<int> shape;
        std::vector<double> value;
        std::vector<double> grad;
        int a = -1;
        int b = -1;
        int c = -1;
        std::vector<int> inputs; // concat only
        double k = 0.0;
        bool requires_grad = false;
    };

public:
    Var leaf(std::vector<int> shape, std::vector<double> values) {
        return make_leaf(std::move(shape), std::move(values), true);
    }

    Var constant(std::vector<int> shape, std::vector<double> values) {
        return make_leaf(std::move(shape), std::move(values), false);
    }

    Var constant(const Image& img) {
        return constant({img.channels(), img.height(), img.width()}, planar_from(img));
    }

    Var leaf(const Image& img) {
        return leaf({img.channels(), img.height(), img.width()}, planar_from(img));
    }

    Var constant_scalar(double v) { return constant({1}, {v}); }

    // -- elementwise -------------------------------------------------------

    Var add(Var a, Var b) { return binary(Op::Add, a, b); }
    Var sub(Var a, Var b) { return binary(Op::Sub, a, b); }
    Var mul(Var a, Var b) { return binary(Op::Mul, a, b); }
    Var div(Var a, Var b) { return binary(Op::Div, a, b); }

    Var add_const(Var a, double k) { return unary_k(Op::AddK, a, k); }
    Var mul_const(Var a, double k) { return unary_k(Op::MulK, a, k); }
    // k - x
    Var rsub_const(double k, Var a) { return unary_k(Op::RsubK, a, k); }
    Var pow_const(Var a, double exponent) { return unary_k(Op::PowK, a, exponent); }
    Var clamp_min(Var a, double bound) { return unary_k(Op::ClampMinK, a, bound); }
    Var abs(Var a) { return unary_k(Op::Abs, a, 0.0); }
    Var sigmoid(Var a) { return unary_k(Op::Sigmoid, a, 0.0); }

    // -- reductions --------------------------------------------------------

    Var mean(Var a) { return reduce(Op::Mean, a); }
    Var sum(Var a) { return reduce(Op::Sum, a); }

    // -- image ops (shape {C, H, W}) ----------------------------------------

    // Forward differences along x/y with a zero last column/row, matching
    // spatial_gradient() on plain images.
    Var grad_x(Var a) { return image_unary(Op::GradX, a); }
    Var grad_y(Var a) { return image_unary(Op::GradY, a); }

    Var avg_pool2(Var a) {
        const Node& n = node(a);
        require_chw(n, "avg_pool2");
        const int c = n.shape[0], h = n.shape[1], w = n.shape[2];
        if (h < 2 || w < 2) throw InvalidArgument("image too small");
        Node out;
        out.op = Op::AvgPool2;
        out.a = a.id();
        out.shape = {c, h / 2, w / 2};
        out.requires_grad = n.requires_grad;
        out.value.resize(static_cast<std::size_t>(c) * (h / 2) * (w / 2));
        const int oh = h / 2, ow = w / 2;
        for (int ch = 0; ch < c; ++ch)
            for (int y = 0; y < oh; ++y)
                for (int x = 0; x < ow; ++x) {
                    const double* p0 = &n.value[(static_cast<std::size_t>(ch) * h + 2 * y) * w + 2 * x];
                    const double* p1 = p0 + w;
                    out.value[(static_cast<std::size_t>(ch) * oh + y) * ow + x] =
                        0.25 * (p0[0] + p0[1] + p1[0] + p1[1]);
                }
        return push(std::move(out));
    }

    Var upsample2(Var a) {
        const Node& n = node(a);
        require_chw(n, "upsample2");
        const int c = n.shape[0], h = n.shape[1], w = n.shape[2];
        Node out;
        out.op = Op::Upsample2;
        out.a = a.id();
        out.shape = {c, 2 * h, 2 * w};
        out.requires_grad = n.requires_grad;
        out.value.resize(n.value.size() * 4);
        for (int ch = 0; ch < c; ++ch)
            for (int y = 0; y < 2 * h; ++y)
                for (int x = 0; x < 2 * w; ++x)
                    out.value[(static_cast<std::size_t>(ch) * 2 * h + y) * 2 * w + x] =
                        n.value[(static_cast<std::size_t>(ch) * h + y / 2) * w + x / 2];
        return push(std::move(out));
    }

    Var concat_channels(const std::vector<Var>& parts) {
        if (parts.empty()) throw InvalidArgument("ad: concat of nothing");
        int total_c = 0;
        const Node& first = node(parts[0]);
        require_chw(first, "concat");
        const int h = first.shape[1], w = first.shape[2];
        Node out;
        out.op = Op::Concat;
        for (const Var& p : parts) {
            const Node& n = node(p);
            require_chw(n, "concat");
            if (n.shape[1] != h || n.shape[2] != w)
                throw InvalidArgument("ad: concat spatial dims differ");
            total_c += n.shape[0];
            out.inputs.push_back(p.id());
            out.requires_grad = out.requires_grad || n.requires_grad;
        }
        out.shape = {total_c, h, w};
        out.value.reserve(static_cast<std::size_t>(total_c) * h * w);
        for (const Var& p : parts) {
            const Node& n = node(p);
            out.value.insert(out.value.end(), n.value.begin(), n.value.end());
        }
        return push(std::move(out));
    }

    // Stride-1 convolution with odd kernel dims and symmetric zero padding;
    // output spatial dims equal input dims. bias may be an invalid Var.
    Var conv2d(Var x, Var w, Var bias) {
        const Node& nx = node(x);
        const Node& nw = node(w);
        require_chw(nx, "conv2d input");
        if (nw.shape.size() != 4) throw InvalidArgument("ad: conv2d weight must be 4-d");
        const int cin = nx.shape[0], h = nx.shape[1], wid = nx.shape[2];
        const int cout = nw.shape[0], kh = nw.shape[2], kw = nw.shape[3];
        if (nw.shape[1] != cin) throw InvalidArgument("ad: conv2d channel mismatch");
        if (kh % 2 == 0 || kw % 2 == 0) throw InvalidArgument("ad: conv2d kernel dims must be odd");
        Node out;
        out.op = Op::Conv2d;
        out.a = x.id();
        out.b = w.id();
        out.requires_grad = nx.requires_grad || nw.requires_grad;
        if (bias.valid()) {
            const Node& nb = node(bias);
            if (nb.shape.size() != 1 || nb.shape[0] != cout)
                throw InvalidArgument("ad: conv2d bias shape mismatch");
            out.c = bias.id();
            out.requires_grad = out.requires_grad || nb.requires_grad;
        }
        out.shape = {cout, h, wid};
        out.value.assign(static_cast<std::size_t>(cout) * h * wid, 0.0);
        const int ph = kh / 2, pw = kw / 2;
        for (int co = 0; co < cout; ++co) {
            double* out_plane = &out.value[static_cast<std::size_t>(co) * h * wid];
            if (out.c >= 0) {
                const double bv = node_by_id(out.c).value[co];
                for (int i = 0; i < h * wid; ++i) out_plane[i] = bv;
            }
            for (int ci = 0; ci < cin; ++ci) {
                const double* in_plane = &nx.value[static_cast<std::size_t>(ci) * h * wid];
                for (int ky = 0; ky < kh; ++ky)
                    for (int kx = 0; kx < kw; ++kx) {
                        const double wv =
                            nw.value[((static_cast<std::size_t>(co) * cin + ci) * kh + ky) * kw + kx];
                        if (wv == 0.0) continue;
                        for (int y = 0; y < h; ++y) {
                            const int yy = y + ky - ph;
                            if (yy < 0 || yy >= h) continue;
                            const int xlo = std::max(0, pw - kx);
                            const int xhi = std::min(wid, wid + pw - kx);
                            const double* src = in_plane + static_cast<std::size_t>(yy) * wid + (xlo + kx - pw);
                            double* dst = out_plane + static_cast<std::size_t>(y) * wid + xlo;
                            for (int x2 = xlo; x2 < xhi; ++x2) *dst++ += wv * *src++;
                        }
                    }
            }
        }
        return push(std::move(out));
    }

    // -- backward ----------------------------------------------------------

    void backward(Var root) {
        Node& r = node_mut(root);
        if (r.value.size() != 1) throw InvalidArgument("ad: backward root must be a scalar");
        for (Node& n : nodes_)
            n.grad.assign(n.value.size(), 0.0);
        r.grad[0] = 1.0;
        for (int id = root.id(); id >= 0; --id) backward_node(id);
    }

    const std::vector<int>& shape_of(int id) const { return nodes_[id].shape; }
    const std::vector<double>& value_of(int id) const { return nodes_[id].value; }
    const std::vector<double>& grad_of(int id) const { return nodes_[id].grad; }
    std::size_t node_count() const { return nodes_.size(); }

    // Distance from the recorded values to the nearest non-smooth point of
    // the graph (abs corners and clamp boundaries). Finite-difference checks
    // are only meaningful on instances where this margin exceeds the probe
    // step by a safe factor. Exact zeros under abs are skipped: they are
    // either structural (gradient-operator borders, where the argument does
    // not depend on the input at all) or symmetric corners, where the
    // subgradient and the central difference agree identically.
    double nonsmoothness_margin() const {
        double margin = std::numeric_limits<double>::infinity();
        for (const Node& n : nodes_) {
            if (n.op == Op::Abs) {
                for (double v : nodes_[n.a].value)
                    if (v != 0.0) margin = std::min(margin, std::fabs(v));
            } else if (n.op == Op::ClampMinK) {
                for (double v : nodes_[n.a].value) margin = std::min(margin, std::fabs(v - n.k));
            }
        }
        return margin;
    }

    // Copies a {C,H,W} tensor back into an interleaved image.
    Image to_image(Var v) const {
        const Node& n = nodes_[v.id()];
        if (n.shape.size() != 3)
            throw InvalidArgument("ad: to_image expects a C x H x W tensor");
        const int c = n.shape[0], h = n.shape[1], w = n.shape[2];
        if (c != 1 && c != 3) throw InvalidArgument("ad: to_image expects 1 or 3 channels");
        Image img(h, w, c);
        for (int ch = 0; ch < c; ++ch)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    img.at(y, x, ch) = n.value[(static_cast<std::size_t>(ch) * h + y) * w + x];
        return img;
    }

    static std::vector<double> planar_from(const Image& img) {
        std::vector<double> out(img.size());
        std::size_t i = 0;
        for (int c = 0; c < img.channels(); ++c)
            for (int y = 0; y < img.height(); ++y)
                for (int x = 0; x < img.width(); ++x) out[i++] = img.at(y, x, c);
        return out;
    }

private:
    friend class Var;

    const Node& node(Var v) const {
        if (!v.valid() || v.tape() != this) throw InvalidArgument("ad: var from another tape");
        return nodes_[v.id()];
    }
    Node& node_mut(Var v) {
        if (!v.valid() || v.tape() != this) throw InvalidArgument("ad: var from another tape");
        return nodes_[v.id()];
    }
    const Node& node_by_id(int id) const { return nodes_[id]; }

    static void require_chw(const Node& n, const char* what) {
        if (n.shape.size() != 3)
            throw InvalidArgument(std::string("ad: ") + what + " expects a C x H x W tensor");
    }

    Var make_leaf(std::vector<int> shape, std::vector<double> values, bool requires_grad) {
        std::size_t total = 1;
        for (int d : shape) {
            if (d <= 0) throw InvalidArgument("ad: shape dims must be positive");
            total *= static_cast<std::size_t>(d);
        }
        if (values.size() != total) throw InvalidArgument("ad: value count does not match shape");
        Node n;
        n.op = Op::Leaf;
        n.shape = std::move(shape);
        n.value = std::move(values);
        n.requires_grad = requires_grad;
        return push(std::move(n));
    }

    Var push(Node n) {
        nodes_.push_back(std::move(n));
        return Var(this, static_cast<int>(nodes_.size()) - 1);
    }

    Var binary(Op op, Var a, Var b) {
        const Node& na = node(a);
        const Node& nb = node(b);
        if (na.shape != nb.shape) throw InvalidArgument("ad: shape mismatch");
        Node out;
        out.op = op;
        out.a = a.id();
        out.b = b.id();
        out.shape = na.shape;
        out.requires_grad = na.requires_grad || nb.requires_grad;
        out.value.resize(na.value.size());
        const std::size_t n = na.value.size();
        switch (op) {
        case Op::Add:
            for (std::size_t i = 0; i < n; ++i) out.value[i] = na.value[i] + nb.value[i];
            break;
        case Op::Sub:
            for (std::size_t i = 0; i < n; ++i) out.value[i] = na.value[i] - nb.value[i];
            break;
        case Op::Mul:
            for (std::size_t i = 0; i < n; ++i) out.value[i] = na.value[i] * nb.value[i];
            break;
        case Op::Div:
            for (std::size_t i = 0; i < n; ++i)
                out.value[i] = na.value[i] / detail::guard(nb.value[i]);
            break;
        default:
            throw InvalidArgument("ad: bad binary op");
        }
        return push(std::move(out));
    }

    Var unary_k(Op op, Var a, double k) {
        const Node& na = node(a);
        Node out;
        out.op = op;
        out.a = a.id();
        out.k = k;
        out.shape = na.shape;
        out.requires_grad = na.requires_grad;
        out.value.resize(na.value.size());
        const std::size_t n = na.value.size();
        switch (op) {
        case Op::AddK:
            for (std::size_t i = 0; i < n; ++i) out.value[i] = na.value[i] + k;
            break;
        case Op::MulK:
            for (std::size_t i = 0; i < n; ++i) out.value[i] = na.value[i] * k;
            break;
        case Op::RsubK:
            for (std::size_t i = 0; i < n; ++i) out.value[i] = k - na.value[i];
            break;
        case Op::PowK:
            for (std::size_t i = 0; i < n; ++i) out.value[i] = std::pow(na.value[i], k);
            break;
        case Op::ClampMinK:
            for (std::size_t i = 0; i < n; ++i) out.value[i] = std::max(na.value[i], k);
            break;
        case Op::Abs:
            for (std::size_t i = 0; i < n; ++i) out.value[i] = std::fabs(na.value[i]);
            break;
        case Op::Sigmoid:
            for (std::size_t i = 0; i < n; ++i) {
                const double x = na.value[i];
                if (x >= 0.0) {
                    out.value[i] = 1.0 / (1.0 + std::exp(-x));
                } else {
                    const double e = std::exp(x);
                    out.value[i] = e / (1.0 + e);
                }
            }
            break;
        default:
            throw InvalidArgument("ad: bad unary op");
        }
        return push(std::move(out));
    }

    Var reduce(Op op, Var a) {
        const Node& na = node(a);
        Node out;
        out.op = op;
        out.a = a.id();
        out.shape = {1};
        out.requires_grad = na.requires_grad;
        double acc = 0.0;
        for (double v : na.value) acc += v;
        if (op == Op::Mean) acc /= static_cast<double>(na.value.size());
        out.value = {acc};
        return push(std::move(out));
    }

    Var image_unary(Op op, Var a) {
        const Node& na = node(a);
        require_chw(na, op == Op::GradX ? "grad_x" : "grad_y");
        const int c = na.shape[0], h = na.shape[1], w = na.shape[2];
        Node out;
        out.op = op;
        out.a = a.id();
        out.shape = na.shape;
        out.requires_grad = na.requires_grad;
        out.value.assign(na.value.size(), 0.0);
        for (int ch = 0; ch < c; ++ch)
            for (int y = 0; y < h; ++y) {
                const double* src = &na.value[(static_cast<std::size_t>(ch) * h + y) * w];
                double* dst = &out.value[(static_cast<std::size_t>(ch) * h + y) * w];
                if (op == Op::GradX) {
                    for (int x = 0; x + 1 < w; ++x) dst[x] = src[x + 1] - src[x];
                } else if (y + 1 < h) {
                    const double* below = &na.value[(static_cast<std::size_t>(ch) * h + y + 1) * w];
                    for (int x = 0; x < w; ++x) dst[x] = below[x] - src[x];
                }
            }
        return push(std::move(out));
    }

    void add_grad(int id, const std::vector<double>& g) {
        Node& n = nodes_[id];
        if (!n.requires_grad) return;
        for (std::size_t i = 0; i < g.size(); ++i) n.grad[i] += g[i];
    }

    void backward_node(int id) {
        Node& n = nodes_[id];
        if (!n.requires_grad) return;
        bool any = false;
        for (double g : n.grad)
            if (g != 0.0) {
                any = true;
                break;
            }
        if (!any && n.op != Op::Leaf) return;
        switch (n.op) {
        case Op::Leaf:
            return;
        case Op::Add: {
            propagate(n.a, n.grad, [](double g, std::size_t) { return g; });
            propagate(n.b, n.grad, [](double g, std::size_t) { return g; });
            return;
        }
        case Op::Sub: {
            propagate(n.a, n.grad, [](double g, std::size_t) { return g; });
            propagate(n.b, n.grad, [](double g, std::size_t) { return -g; });
            return;
        }
        case Op::Mul: {
            const Node& na = nodes_[n.a];
            const Node& nb = nodes_[n.b];
            propagate(n.a, n.grad, [&](double g, std::size_t i) { return g * nb.value[i]; });
            propagate(n.b, n.grad, [&](double g, std::size_t i) { return g * na.value[i]; });
            return;
        }
        case Op::Div: {
            const Node& na = nodes_[n.a];
            const Node& nb = nodes_[n.b];
            propagate(n.a, n.grad,
                      [&](double g, std::size_t i) { return g / detail::guard(nb.value[i]); });
            propagate(n.b, n.grad, [&](double g, std::size_t i) {
                const double d = detail::guard(nb.value[i]);
                return -g * na.value[i] / (d * d);
            });
            return;
        }
        case Op::PowK: {
            const Node& na = nodes_[n.a];
            propagate(n.a, n.grad, [&](double g, std::size_t i) {
                return g * n.k * std::pow(detail::guard(na.value[i]), n.k - 1.0);
            });
            return;
        }
        case Op::ClampMinK: {
            const Node& na = nodes_[n.a];
            propagate(n.a, n.grad,
                      [&](double g, std::size_t i) { return na.value[i] > n.k ? g : 0.0; });
            return;
        }
        case Op::Abs: {
            const Node& na = nodes_[n.a];
            propagate(n.a, n.grad, [&](double g, std::size_t i) {
                return na.value[i] > 0.0 ? g : (na.value[i] < 0.0 ? -g : 0.0);
            });
            return;
        }
        case Op::Sigmoid: {
            propagate(n.a, n.grad,
                      [&](double g, std::size_t i) { return g * n.value[i] * (1.0 - n.value[i]); });
            return;
        }
        case Op::AddK:
            propagate(n.a, n.grad, [](double g, std::size_t) { return g; });
            return;
        case Op::MulK:
            propagate(n.a, n.grad, [&](double g, std::size_t) { return g * n.k; });
            return;
        case Op::RsubK:
            propagate(n.a, n.grad, [](double g, std::size_t) { return -g; });
            return;
        case Op::Mean: {
            Node& na = nodes_[n.a];
            if (!na.requires_grad) return;
            const double g = n.grad[0] / static_cast<double>(na.value.size());
            for (double& d : na.grad) d += g;
            return;
        }
        case Op::Sum: {
            Node& na = nodes_[n.a];
            if (!na.requires_grad) return;
            const double g = n.grad[0];
            for (double& d : na.grad) d += g;
            return;
        }
        case Op::GradX:
        case Op::GradY: {
            Node& na = nodes_[n.a];
            if (!na.requires_grad) return;
            const int c = n.shape[0], h = n.shape[1], w = n.shape[2];
            for (int ch = 0; ch < c; ++ch)
                for (int y = 0; y < h; ++y) {
                    const std::size_t row = (static_cast<std::size_t>(ch) * h + y) * w;
                    if (n.op == Op::GradX) {
                        for (int x = 0; x + 1 < w; ++x) {
                            const double g = n.grad[row + x];
                            na.grad[row + x + 1] += g;
                            na.grad[row + x] -= g;
                        }
                    } else if (y + 1 < h) {
                        const std::size_t next = row + static_cast<std::size_t>(w);
                        for (int x = 0; x < w; ++x) {
                            const double g = n.grad[row + x];
                            na.grad[next + x] += g;
                            na.grad[row + x] -= g;
                        }
                    }
                }
            return;
        }
        case Op::AvgPool2: {
            Node& na = nodes_[n.a];
            if (!na.requires_grad) return;
            const int c = n.shape[0], oh = n.shape[1], ow = n.shape[2];
            const int h = na.shape[1], w = na.shape[2];
            for (int ch = 0; ch < c; ++ch)
                for (int y = 0; y < oh; ++y)
                    for (int x = 0; x < ow; ++x) {
                        const double g = 0.25 * n.grad[(static_cast<std::size_t>(ch) * oh + y) * ow + x];
                        double* p0 = &na.grad[(static_cast<std::size_t>(ch) * h + 2 * y) * w + 2 * x];
                        double* p1 = p0 + w;
                        p0[0] += g;
                        p0[1] += g;
                        p1[0] += g;
                        p1[1] += g;
                    }
            return;
        }
        case Op::Upsample2: {
            Node& na = nodes_[n.a];
            if (!na.requires_grad) return;
            const int c = n.shape[0], oh = n.shape[1], ow = n.shape[2];
            const int h = na.shape[1], w = na.shape[2];
            for (int ch = 0; ch < c; ++ch)
                for (int y = 0; y < oh; ++y)
                    for (int x = 0; x < ow; ++x)
                        na.grad[(static_cast<std::size_t>(ch) * h + y / 2) * w + x / 2] +=
                            n.grad[(static_cast<std::size_t>(ch) * oh + y) * ow + x];
            return;
        }
        case Op::Concat: {
            std::size_t offset = 0;
            for (int in_id : n.inputs) {
                Node& ni = nodes_[in_id];
                if (ni.requires_grad)
                    for (std::size_t i = 0; i < ni.value.size(); ++i) ni.grad[i] += n.grad[offset + i];
                offset += ni.value.size();
            }
            return;
        }
        case Op::Conv2d: {
            backward_conv(n);
            return;
        }
        }
    }

    template <typename Fn> void propagate(int id, const std::vector<double>& g, Fn fn) {
        Node& n = nodes_[id];
        if (!n.requires_grad) return;
        for (std::size_t i = 0; i < g.size(); ++i) n.grad[i] += fn(g[i], i);
    }

    void backward_conv(Node& n) {
        Node& nx = nodes_[n.a];
        Node& nw = nodes_[n.b];
        const int cin = nx.shape[0], h = nx.shape[1], wid = nx.shape[2];
        const int cout = nw.shape[0], kh = nw.shape[2], kw = nw.shape[3];
        const int ph = kh / 2, pw = kw / 2;
        if (n.c >= 0 && nodes_[n.c].requires_grad) {
            Node& nb = nodes_[n.c];
            for (int co = 0; co < cout; ++co) {
                double acc = 0.0;
                const double* gp = &n.grad[static_cast<std::size_t>(co) * h * wid];
                for (int i = 0; i < h * wid; ++i) acc += gp[i];
                nb.grad[co] += acc;
            }
        }
        for (int co = 0; co < cout; ++co) {
            const double* gout = &n.grad[static_cast<std::size_t>(co) * h * wid];
            for (int ci = 0; ci < cin; ++ci) {
                const double* in_plane = &nx.value[static_cast<std::size_t>(ci) * h * wid];
                double* gin_plane = nx.requires_grad ? &nx.grad[static_cast<std::size_t>(ci) * h * wid] : nullptr;
                for (int ky = 0; ky < kh; ++ky)
                    for (int kx = 0; kx < kw; ++kx) {
                        const std::size_t widx =
                            ((static_cast<std::size_t>(co) * cin + ci) * kh + ky) * kw + kx;
                        const double wv = nw.value[widx];
                        double wacc = 0.0;
                        for (int y = 0; y < h; ++y) {
                            const int yy = y + ky - ph;
                            if (yy < 0 || yy >= h) continue;
                            const int xlo = std::max(0, pw - kx);
                            const int xhi = std::min(wid, wid + pw - kx);
                            const double* grow = gout + static_cast<std::size_t>(y) * wid + xlo;
                            const std::size_t in_off =
                                static_cast<std::size_t>(yy) * wid + (xlo + kx - pw);
                            if (nw.requires_grad) {
                                const double* irow = in_plane + in_off;
                                for (int x2 = xlo; x2 < xhi; ++x2)
                                    wacc += grow[x2 - xlo] * irow[x2 - xlo];
                            }
                            if (gin_plane) {
                                double* girow = gin_plane + in_off;
                                for (int x2 = xlo; x2 < xhi; ++x2)
                                    girow[x2 - xlo] += wv * grow[x2 - xlo];
                            }
                        }
                        if (nw.requires_grad) nw.grad[widx] += wacc;
                    }
            }
        }
    }

    std::vector<Node> nodes_;
};

inline const std::vector<int>& Var::shape() const { return tape_->shape_of(id_); }
inline const std::vector<double>& Var::value() const { return tape_->value_of(id_); }
inline const std::vector<double>& Var::grad() const { return tape_->grad_of(id_); }

} // namespace ihdr::ad
