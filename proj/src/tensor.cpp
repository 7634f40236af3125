#include "rcc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace rcc::ad {

namespace {

void check(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument(msg);
}

double stable_softplus(double x) {
    if (x > 30.0) return x;
    if (x < -30.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

std::string shape_string(const std::vector<size_t>& shape) {
    std::ostringstream os;
    os << '(';
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ')';
    return os.str();
}

size_t shape_numel(const std::vector<size_t>& shape) {
    size_t n = 1;
    for (const size_t d : shape) n *= d;
    return n;
}

double Tensor::scalar() const {
    if (!node_ || node_->value.size() != 1)
        throw std::invalid_argument("scalar() on non-scalar tensor");
    return node_->value[0];
}

Tensor Tape::make(std::vector<size_t> shape, bool requires_grad) {
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value.assign(shape_numel(node->shape), 0.0);
    node->grad.assign(node->value.size(), 0.0);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

void Tape::record(std::function<void()> fn) { ops_.push_back({std::move(fn)}); }

Tensor Tape::leaf(std::vector<size_t> shape, std::vector<double> data,
                  bool requires_grad) {
    check(shape_numel(shape) == data.size(),
          "leaf: data length " + std::to_string(data.size()) +
              " does not match shape " + shape_string(shape));
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(data);
    node->grad.assign(node->value.size(), 0.0);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tape::zeros(std::vector<size_t> shape, bool requires_grad) {
    const size_t n = shape_numel(shape);
    return leaf(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tape::constant(std::vector<size_t> shape, std::vector<double> data) {
    return leaf(std::move(shape), std::move(data), false);
}

Tensor Tape::detach(const Tensor& a) {
    return leaf(a.shape(), a.data(), false);
}

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
    check(a.shape().size() == 2 && b.shape().size() == 2 &&
              a.shape()[1] == b.shape()[0],
          "matmul: incompatible shapes " + shape_string(a.shape()) + " x " +
              shape_string(b.shape()));
    const size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    Tensor out = make({m, n}, a.requires_grad() || b.requires_grad());
    const auto& av = a.data();
    const auto& bv = b.data();
    auto& ov = out.data();
    for (size_t i = 0; i < m; ++i)
        for (size_t p = 0; p < k; ++p) {
            const double aip = av[i * k + p];
            if (aip == 0.0) continue;
            for (size_t j = 0; j < n; ++j) ov[i * n + j] += aip * bv[p * n + j];
        }
    auto an = a.node_, bn = b.node_, on = out.node_;
    record([an, bn, on, m, k, n] {
        const auto& g = on->grad;
        if (an->requires_grad) {
            auto& ga = an->grad;
            for (size_t i = 0; i < m; ++i)
                for (size_t j = 0; j < n; ++j) {
                    const double gij = g[i * n + j];
                    if (gij == 0.0) continue;
                    for (size_t p = 0; p < k; ++p)
                        ga[i * k + p] += gij * bn->value[p * n + j];
                }
        }
        if (bn->requires_grad) {
            auto& gb = bn->grad;
            for (size_t i = 0; i < m; ++i)
                for (size_t p = 0; p < k; ++p) {
                    const double aip = an->value[i * k + p];
                    if (aip == 0.0) continue;
                    for (size_t j = 0; j < n; ++j)
                        gb[p * n + j] += aip * g[i * n + j];
                }
        }
    });
    return out;
}

Tensor Tape::add(const Tensor& a, const Tensor& b) {
    check(a.shape() == b.shape(), "add: shape mismatch " +
                                      shape_string(a.shape()) + " vs " +
                                      shape_string(b.shape()));
    Tensor out = make(a.shape(), a.requires_grad() || b.requires_grad());
    for (size_t i = 0; i < out.size(); ++i)
        out.data()[i] = a.data()[i] + b.data()[i];
    auto an = a.node_, bn = b.node_, on = out.node_;
    record([an, bn, on] {
        if (an->requires_grad)
            for (size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += on->grad[i];
        if (bn->requires_grad)
            for (size_t i = 0; i < on->grad.size(); ++i) bn->grad[i] += on->grad[i];
    });
    return out;
}

Tensor Tape::add_rowwise(const Tensor& a, const Tensor& bias) {
    check(a.shape().size() == 2 && bias.shape().size() == 1 &&
              a.shape()[1] == bias.shape()[0],
          "add_rowwise: shape mismatch " + shape_string(a.shape()) + " vs " +
              shape_string(bias.shape()));
    const size_t n = a.shape()[0], w = a.shape()[1];
    Tensor out = make(a.shape(), a.requires_grad() || bias.requires_grad());
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < w; ++j)
            out.data()[i * w + j] = a.data()[i * w + j] + bias.data()[j];
    auto an = a.node_, bn = bias.node_, on = out.node_;
    record([an, bn, on, n, w] {
        if (an->requires_grad)
            for (size_t i = 0; i < n * w; ++i) an->grad[i] += on->grad[i];
        if (bn->requires_grad)
            for (size_t i = 0; i < n; ++i)
                for (size_t j = 0; j < w; ++j) bn->grad[j] += on->grad[i * w + j];
    });
    return out;
}

Tensor Tape::add_channelwise(const Tensor& a, const Tensor& bias) {
    check(a.shape().size() == 3 && bias.shape().size() == 1 &&
              a.shape()[1] == bias.shape()[0],
          "add_channelwise: shape mismatch " + shape_string(a.shape()) +
              " vs " + shape_string(bias.shape()));
    const size_t n = a.shape()[0], c = a.shape()[1], l = a.shape()[2];
    Tensor out = make(a.shape(), a.requires_grad() || bias.requires_grad());
    for (size_t i = 0; i < n; ++i)
        for (size_t ch = 0; ch < c; ++ch)
            for (size_t p = 0; p < l; ++p)
                out.data()[(i * c + ch) * l + p] =
                    a.data()[(i * c + ch) * l + p] + bias.data()[ch];
    auto an = a.node_, bn = bias.node_, on = out.node_;
    record([an, bn, on, n, c, l] {
        if (an->requires_grad)
            for (size_t i = 0; i < n * c * l; ++i) an->grad[i] += on->grad[i];
        if (bn->requires_grad)
            for (size_t i = 0; i < n; ++i)
                for (size_t ch = 0; ch < c; ++ch)
                    for (size_t p = 0; p < l; ++p)
                        bn->grad[ch] += on->grad[(i * c + ch) * l + p];
    });
    return out;
}

Tensor Tape::sub(const Tensor& a, const Tensor& b) {
    check(a.shape() == b.shape(), "sub: shape mismatch " +
                                      shape_string(a.shape()) + " vs " +
                                      shape_string(b.shape()));
    Tensor out = make(a.shape(), a.requires_grad() || b.requires_grad());
    for (size_t i = 0; i < out.size(); ++i)
        out.data()[i] = a.data()[i] - b.data()[i];
    auto an = a.node_, bn = b.node_, on = out.node_;
    record([an, bn, on] {
        if (an->requires_grad)
            for (size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += on->grad[i];
        if (bn->requires_grad)
            for (size_t i = 0; i < on->grad.size(); ++i) bn->grad[i] -= on->grad[i];
    });
    return out;
}

Tensor Tape::mul(const Tensor& a, const Tensor& b) {
    check(a.shape() == b.shape(), "mul: shape mismatch " +
                                      shape_string(a.shape()) + " vs " +
                                      shape_string(b.shape()));
    Tensor out = make(a.shape(), a.requires_grad() || b.requires_grad());
    for (size_t i = 0; i < out.size(); ++i)
        out.data()[i] = a.data()[i] * b.data()[i];
    auto an = a.node_, bn = b.node_, on = out.node_;
    record([an, bn, on] {
        if (an->requires_grad)
            for (size_t i = 0; i < on->grad.size(); ++i)
                an->grad[i] += on->grad[i] * bn->value[i];
        if (bn->requires_grad)
            for (size_t i = 0; i < on->grad.size(); ++i)
                bn->grad[i] += on->grad[i] * an->value[i];
    });
    return out;
}

Tensor Tape::scale(const Tensor& a, double c) {
    Tensor out = make(a.shape(), a.requires_grad());
    for (size_t i = 0; i < out.size(); ++i) out.data()[i] = a.data()[i] * c;
    auto an = a.node_, on = out.node_;
    record([an, on, c] {
        if (an->requires_grad)
            for (size_t i = 0; i < on->grad.size(); ++i)
                an->grad[i] += c * on->grad[i];
    });
    return out;
}

Tensor Tape::mean(const Tensor& a) {
    const size_t n = a.size();
    check(n > 0, "mean: empty tensor");
    Tensor out = make({1}, a.requires_grad());
    double s = 0.0;
    for (const double v : a.data()) s += v;
    out.data()[0] = s / static_cast<double>(n);
    auto an = a.node_, on = out.node_;
    record([an, on, n] {
        if (!an->requires_grad) return;
        const double g = on->grad[0] / static_cast<double>(n);
        for (auto& gv : an->grad) gv += g;
    });
    return out;
}

Tensor Tape::sum(const Tensor& a) {
    Tensor out = make({1}, a.requires_grad());
    double s = 0.0;
    for (const double v : a.data()) s += v;
    out.data()[0] = s;
    auto an = a.node_, on = out.node_;
    record([an, on] {
        if (!an->requires_grad) return;
        const double g = on->grad[0];
        for (auto& gv : an->grad) gv += g;
    });
    return out;
}

Tensor Tape::concat(const std::vector<Tensor>& parts, size_t axis) {
    check(!parts.empty(), "concat: no inputs");
    const auto& s0 = parts[0].shape();
    check(axis < s0.size(), "concat: axis out of range");
    size_t axis_total = 0;
    bool rg = false;
    for (const auto& p : parts) {
        check(p.shape().size() == s0.size(), "concat: rank mismatch");
        for (size_t d = 0; d < s0.size(); ++d)
            if (d != axis)
                check(p.shape()[d] == s0[d],
                      "concat: shape mismatch " + shape_string(p.shape()) +
                          " vs " + shape_string(s0));
        axis_total += p.shape()[axis];
        rg = rg || p.requires_grad();
    }
    std::vector<size_t> out_shape = s0;
    out_shape[axis] = axis_total;
    Tensor out = make(out_shape, rg);

    size_t outer = 1, inner = 1;
    for (size_t d = 0; d < axis; ++d) outer *= s0[d];
    for (size_t d = axis + 1; d < s0.size(); ++d) inner *= s0[d];

    std::vector<std::shared_ptr<Node>> in_nodes;
    std::vector<size_t> blocks;  // per-part block size along axis*inner
    size_t offset = 0;
    for (const auto& p : parts) {
        const size_t blk = p.shape()[axis] * inner;
        for (size_t o = 0; o < outer; ++o)
            std::copy(p.data().begin() + o * blk, p.data().begin() + (o + 1) * blk,
                      out.data().begin() + o * axis_total * inner + offset);
        in_nodes.push_back(p.node_);
        blocks.push_back(blk);
        offset += blk;
    }
    auto on = out.node_;
    const size_t total_blk = axis_total * inner;
    record([in_nodes, blocks, on, outer, total_blk] {
        size_t off = 0;
        for (size_t pi = 0; pi < in_nodes.size(); ++pi) {
            const size_t blk = blocks[pi];
            if (in_nodes[pi]->requires_grad)
                for (size_t o = 0; o < outer; ++o)
                    for (size_t i = 0; i < blk; ++i)
                        in_nodes[pi]->grad[o * blk + i] +=
                            on->grad[o * total_blk + off + i];
            off += blk;
        }
    });
    return out;
}

Tensor Tape::slice(const Tensor& a, size_t axis, size_t start, size_t len) {
    const auto& s = a.shape();
    check(axis < s.size(), "slice: axis out of range");
    check(start + len <= s[axis], "slice: range [" + std::to_string(start) +
                                      "," + std::to_string(start + len) +
                                      ") exceeds axis size " +
                                      std::to_string(s[axis]));
    std::vector<size_t> out_shape = s;
    out_shape[axis] = len;
    Tensor out = make(out_shape, a.requires_grad());
    size_t outer = 1, inner = 1;
    for (size_t d = 0; d < axis; ++d) outer *= s[d];
    for (size_t d = axis + 1; d < s.size(); ++d) inner *= s[d];
    const size_t in_blk = s[axis] * inner, out_blk = len * inner;
    for (size_t o = 0; o < outer; ++o)
        std::copy(a.data().begin() + o * in_blk + start * inner,
                  a.data().begin() + o * in_blk + (start + len) * inner,
                  out.data().begin() + o * out_blk);
    auto an = a.node_, on = out.node_;
    record([an, on, outer, inner, in_blk, out_blk, start] {
        if (!an->requires_grad) return;
        for (size_t o = 0; o < outer; ++o)
            for (size_t i = 0; i < out_blk; ++i)
                an->grad[o * in_blk + start * inner + i] += on->grad[o * out_blk + i];
    });
    return out;
}

Tensor Tape::reshape(const Tensor& a, std::vector<size_t> shape) {
    check(shape_numel(shape) == a.size(),
          "reshape: cannot reshape " + shape_string(a.shape()) + " to " +
              shape_string(shape));
    Tensor out = make(std::move(shape), a.requires_grad());
    out.data() = a.data();
    auto an = a.node_, on = out.node_;
    record([an, on] {
        if (!an->requires_grad) return;
        for (size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += on->grad[i];
    });
    return out;
}

Tensor Tape::transpose2(const Tensor& a) {
    check(a.shape().size() == 2, "transpose2: input must be 2D, got " +
                                     shape_string(a.shape()));
    const size_t m = a.shape()[0], n = a.shape()[1];
    Tensor out = make({n, m}, a.requires_grad());
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j)
            out.data()[j * m + i] = a.data()[i * n + j];
    auto an = a.node_, on = out.node_;
    record([an, on, m, n] {
        if (!an->requires_grad) return;
        for (size_t i = 0; i < m; ++i)
            for (size_t j = 0; j < n; ++j)
                an->grad[i * n + j] += on->grad[j * m + i];
    });
    return out;
}

Tensor Tape::relu(const Tensor& a) {
    Tensor out = make(a.shape(), a.requires_grad());
    for (size_t i = 0; i < a.size(); ++i)
        out.data()[i] = a.data()[i] > 0.0 ? a.data()[i] : 0.0;
    auto an = a.node_, on = out.node_;
    record([an, on] {
        if (!an->requires_grad) return;
        for (size_t i = 0; i < on->grad.size(); ++i)
            if (an->value[i] > 0.0) an->grad[i] += on->grad[i];
    });
    return out;
}

Tensor Tape::tanh_act(const Tensor& a) {
    Tensor out = make(a.shape(), a.requires_grad());
    for (size_t i = 0; i < a.size(); ++i) out.data()[i] = std::tanh(a.data()[i]);
    auto an = a.node_, on = out.node_;
    record([an, on] {
        if (!an->requires_grad) return;
        for (size_t i = 0; i < on->grad.size(); ++i)
            an->grad[i] += on->grad[i] * (1.0 - on->value[i] * on->value[i]);
    });
    return out;
}

Tensor Tape::softplus(const Tensor& a) {
    Tensor out = make(a.shape(), a.requires_grad());
    for (size_t i = 0; i < a.size(); ++i)
        out.data()[i] = stable_softplus(a.data()[i]);
    auto an = a.node_, on = out.node_;
    record([an, on] {
        if (!an->requires_grad) return;
        for (size_t i = 0; i < on->grad.size(); ++i)
            an->grad[i] += on->grad[i] * sigmoid(an->value[i]);
    });
    return out;
}

Tensor Tape::softmax_last(const Tensor& a) {
    const auto& s = a.shape();
    check(!s.empty(), "softmax_last: scalar input");
    const size_t k = s.back();
    const size_t rows = a.size() / k;
    Tensor out = make(s, a.requires_grad());
    for (size_t r = 0; r < rows; ++r) {
        const double* x = a.data().data() + r * k;
        double* y = out.data().data() + r * k;
        double mx = x[0];
        for (size_t i = 1; i < k; ++i) mx = std::max(mx, x[i]);
        double z = 0.0;
        for (size_t i = 0; i < k; ++i) z += (y[i] = std::exp(x[i] - mx));
        for (size_t i = 0; i < k; ++i) y[i] /= z;
    }
    auto an = a.node_, on = out.node_;
    record([an, on, rows, k] {
        if (!an->requires_grad) return;
        for (size_t r = 0; r < rows; ++r) {
            const double* y = on->value.data() + r * k;
            const double* gy = on->grad.data() + r * k;
            double dot = 0.0;
            for (size_t i = 0; i < k; ++i) dot += gy[i] * y[i];
            for (size_t i = 0; i < k; ++i)
                an->grad[r * k + i] += y[i] * (gy[i] - dot);
        }
    });
    return out;
}

Tensor Tape::conv1d(const Tensor& x, const Tensor& w, const Tensor& b) {
    check(x.shape().size() == 3, "conv1d: input must be (N,C,L), got " +
                                     shape_string(x.shape()));
    check(w.shape().size() == 3 && w.shape()[1] == x.shape()[1],
          "conv1d: weight " + shape_string(w.shape()) +
              " incompatible with input " + shape_string(x.shape()));
    check(w.shape()[2] % 2 == 1, "conv1d: kernel width must be odd");
    check(b.shape().size() == 1 && b.shape()[0] == w.shape()[0],
          "conv1d: bias " + shape_string(b.shape()) +
              " incompatible with weight " + shape_string(w.shape()));
    const size_t n = x.shape()[0], c = x.shape()[1], l = x.shape()[2];
    const size_t f = w.shape()[0], k = w.shape()[2];
    const long pad = static_cast<long>(k / 2);
    Tensor out = make({n, f, l},
                      x.requires_grad() || w.requires_grad() || b.requires_grad());
    const auto& xv = x.data();
    const auto& wv = w.data();
    auto& ov = out.data();
    for (size_t i = 0; i < n; ++i)
        for (size_t fo = 0; fo < f; ++fo) {
            double* orow = ov.data() + (i * f + fo) * l;
            for (size_t p = 0; p < l; ++p) orow[p] = b.data()[fo];
            for (size_t ci = 0; ci < c; ++ci) {
                const double* xrow = xv.data() + (i * c + ci) * l;
                const double* wrow = wv.data() + (fo * c + ci) * k;
                for (size_t j = 0; j < k; ++j) {
                    const double wj = wrow[j];
                    if (wj == 0.0) continue;
                    const long shift = static_cast<long>(j) - pad;
                    const size_t p0 = shift < 0 ? static_cast<size_t>(-shift) : 0;
                    const size_t p1 = shift > 0 ? l - static_cast<size_t>(shift) : l;
                    for (size_t p = p0; p < p1; ++p)
                        orow[p] += wj * xrow[p + shift];
                }
            }
        }
    auto xn = x.node_, wn = w.node_, bn = b.node_, on = out.node_;
    record([xn, wn, bn, on, n, c, l, f, k, pad] {
        const auto& g = on->grad;
        for (size_t i = 0; i < n; ++i)
            for (size_t fo = 0; fo < f; ++fo) {
                const double* grow = g.data() + (i * f + fo) * l;
                if (bn->requires_grad) {
                    double s = 0.0;
                    for (size_t p = 0; p < l; ++p) s += grow[p];
                    bn->grad[fo] += s;
                }
                for (size_t ci = 0; ci < c; ++ci) {
                    const double* xrow = xn->value.data() + (i * c + ci) * l;
                    double* gxrow = xn->grad.data() + (i * c + ci) * l;
                    const double* wrow = wn->value.data() + (fo * c + ci) * k;
                    double* gwrow = wn->grad.data() + (fo * c + ci) * k;
                    for (size_t j = 0; j < k; ++j) {
                        const long shift = static_cast<long>(j) - pad;
                        const size_t p0 = shift < 0 ? static_cast<size_t>(-shift) : 0;
                        const size_t p1 = shift > 0 ? l - static_cast<size_t>(shift) : l;
                        if (wn->requires_grad) {
                            double s = 0.0;
                            for (size_t p = p0; p < p1; ++p)
                                s += grow[p] * xrow[p + shift];
                            gwrow[j] += s;
                        }
                        if (xn->requires_grad) {
                            const double wj = wrow[j];
                            if (wj != 0.0)
                                for (size_t p = p0; p < p1; ++p)
                                    gxrow[p + shift] += wj * grow[p];
                        }
                    }
                }
            }
    });
    return out;
}

Tensor Tape::batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                        std::vector<double>& running_mean,
                        std::vector<double>& running_var, double momentum,
                        double eps, bool training) {
    const auto& s = x.shape();
    check(s.size() == 2 || s.size() == 3,
          "batch_norm: input must be (N,C) or (N,C,L), got " + shape_string(s));
    const size_t n = s[0], c = s[1], l = s.size() == 3 ? s[2] : 1;
    check(gamma.shape() == std::vector<size_t>{c} &&
              beta.shape() == std::vector<size_t>{c},
          "batch_norm: gamma/beta must be (C,)");
    check(running_mean.size() == c && running_var.size() == c,
          "batch_norm: running statistics size mismatch");
    const size_t m = n * l;
    check(!training || m >= 1, "batch_norm: empty batch");

    Tensor out = make(s, x.requires_grad() || gamma.requires_grad() ||
                             beta.requires_grad());
    std::vector<double> mean_c(c), var_c(c);
    if (training) {
        for (size_t ch = 0; ch < c; ++ch) {
            double mu = 0.0;
            for (size_t i = 0; i < n; ++i)
                for (size_t p = 0; p < l; ++p) mu += x.data()[(i * c + ch) * l + p];
            mu /= static_cast<double>(m);
            double var = 0.0;
            for (size_t i = 0; i < n; ++i)
                for (size_t p = 0; p < l; ++p) {
                    const double d = x.data()[(i * c + ch) * l + p] - mu;
                    var += d * d;
                }
            var /= static_cast<double>(m);
            mean_c[ch] = mu;
            var_c[ch] = var;
            running_mean[ch] = (1.0 - momentum) * running_mean[ch] + momentum * mu;
            running_var[ch] = (1.0 - momentum) * running_var[ch] + momentum * var;
        }
    } else {
        mean_c = running_mean;
        var_c = running_var;
    }
    std::vector<double> invstd(c);
    for (size_t ch = 0; ch < c; ++ch) invstd[ch] = 1.0 / std::sqrt(var_c[ch] + eps);
    for (size_t i = 0; i < n; ++i)
        for (size_t ch = 0; ch < c; ++ch)
            for (size_t p = 0; p < l; ++p) {
                const size_t idx = (i * c + ch) * l + p;
                out.data()[idx] =
                    gamma.data()[ch] * (x.data()[idx] - mean_c[ch]) * invstd[ch] +
                    beta.data()[ch];
            }

    auto xn = x.node_, gn = gamma.node_, bn = beta.node_, on = out.node_;
    record([xn, gn, bn, on, n, c, l, m, mean_c, invstd, training] {
        for (size_t ch = 0; ch < c; ++ch) {
            double sum_gy = 0.0, sum_gy_xhat = 0.0;
            for (size_t i = 0; i < n; ++i)
                for (size_t p = 0; p < l; ++p) {
                    const size_t idx = (i * c + ch) * l + p;
                    const double xhat =
                        (xn->value[idx] - mean_c[ch]) * invstd[ch];
                    sum_gy += on->grad[idx];
                    sum_gy_xhat += on->grad[idx] * xhat;
                }
            if (gn->requires_grad) gn->grad[ch] += sum_gy_xhat;
            if (bn->requires_grad) bn->grad[ch] += sum_gy;
            if (!xn->requires_grad) continue;
            const double gamma_ch = gn->value[ch];
            if (training) {
                const double inv_m = 1.0 / static_cast<double>(m);
                for (size_t i = 0; i < n; ++i)
                    for (size_t p = 0; p < l; ++p) {
                        const size_t idx = (i * c + ch) * l + p;
                        const double xhat =
                            (xn->value[idx] - mean_c[ch]) * invstd[ch];
                        xn->grad[idx] +=
                            gamma_ch * invstd[ch] *
                            (on->grad[idx] - inv_m * sum_gy - inv_m * xhat * sum_gy_xhat);
                    }
            } else {
                for (size_t i = 0; i < n; ++i)
                    for (size_t p = 0; p < l; ++p) {
                        const size_t idx = (i * c + ch) * l + p;
                        xn->grad[idx] += gamma_ch * invstd[ch] * on->grad[idx];
                    }
            }
        }
    });
    return out;
}

Tensor Tape::upsample_linear2(const Tensor& x) {
    check(x.shape().size() == 3, "upsample_linear2: input must be (N,C,L)");
    const size_t n = x.shape()[0], c = x.shape()[1], l = x.shape()[2];
    check(l >= 1, "upsample_linear2: empty length axis");
    Tensor out = make({n, c, 2 * l}, x.requires_grad());
    for (size_t row = 0; row < n * c; ++row) {
        const double* xi = x.data().data() + row * l;
        double* yo = out.data().data() + row * 2 * l;
        for (size_t p = 0; p < l; ++p) {
            yo[2 * p] = xi[p];
            yo[2 * p + 1] = p + 1 < l ? 0.5 * (xi[p] + xi[p + 1]) : xi[p];
        }
    }
    auto xn = x.node_, on = out.node_;
    record([xn, on, n, c, l] {
        if (!xn->requires_grad) return;
        for (size_t row = 0; row < n * c; ++row) {
            double* gx = xn->grad.data() + row * l;
            const double* gy = on->grad.data() + row * 2 * l;
            for (size_t p = 0; p < l; ++p) {
                gx[p] += gy[2 * p];
                if (p + 1 < l) {
                    gx[p] += 0.5 * gy[2 * p + 1];
                    gx[p + 1] += 0.5 * gy[2 * p + 1];
                } else {
                    gx[p] += gy[2 * p + 1];
                }
            }
        }
    });
    return out;
}

Tensor Tape::downsample_avg2(const Tensor& x) {
    check(x.shape().size() == 3, "downsample_avg2: input must be (N,C,L)");
    const size_t n = x.shape()[0], c = x.shape()[1], l = x.shape()[2];
    const size_t lo = (l + 1) / 2;
    Tensor out = make({n, c, lo}, x.requires_grad());
    for (size_t row = 0; row < n * c; ++row) {
        const double* xi = x.data().data() + row * l;
        double* yo = out.data().data() + row * lo;
        for (size_t p = 0; p < lo; ++p) {
            if (2 * p + 1 < l)
                yo[p] = 0.5 * (xi[2 * p] + xi[2 * p + 1]);
            else
                yo[p] = xi[2 * p];
        }
    }
    auto xn = x.node_, on = out.node_;
    record([xn, on, n, c, l, lo] {
        if (!xn->requires_grad) return;
        for (size_t row = 0; row < n * c; ++row) {
            double* gx = xn->grad.data() + row * l;
            const double* gy = on->grad.data() + row * lo;
            for (size_t p = 0; p < lo; ++p) {
                if (2 * p + 1 < l) {
                    gx[2 * p] += 0.5 * gy[p];
                    gx[2 * p + 1] += 0.5 * gy[p];
                } else {
                    gx[2 * p] += gy[p];
                }
            }
        }
    });
    return out;
}

Tensor Tape::gumbel_softmax(const Tensor& logits, double tau, Rng& rng) {
    check(tau > 0.0, "gumbel_softmax: tau must be positive");
    const auto& s = logits.shape();
    check(!s.empty(), "gumbel_softmax: scalar input");
    const size_t k = s.back();
    const size_t rows = logits.size() / k;
    Tensor out = make(s, logits.requires_grad());
    for (size_t r = 0; r < rows; ++r) {
        const double* x = logits.data().data() + r * k;
        double* y = out.data().data() + r * k;
        double mx = -1e300;
        for (size_t i = 0; i < k; ++i) {
            y[i] = (x[i] + rng.gumbel()) / tau;
            mx = std::max(mx, y[i]);
        }
        double z = 0.0;
        for (size_t i = 0; i < k; ++i) z += (y[i] = std::exp(y[i] - mx));
        for (size_t i = 0; i < k; ++i) y[i] /= z;
    }
    auto an = logits.node_, on = out.node_;
    record([an, on, rows, k, tau] {
        if (!an->requires_grad) return;
        const double inv_tau = 1.0 / tau;
        for (size_t r = 0; r < rows; ++r) {
            const double* y = on->value.data() + r * k;
            const double* gy = on->grad.data() + r * k;
            double dot = 0.0;
            for (size_t i = 0; i < k; ++i) dot += gy[i] * y[i];
            for (size_t i = 0; i < k; ++i)
                an->grad[r * k + i] += inv_tau * y[i] * (gy[i] - dot);
        }
    });
    return out;
}

Tensor Tape::gaussian_sample(const Tensor& mu, const Tensor& sigma, Rng& rng) {
    check(mu.shape() == sigma.shape(), "gaussian_sample: shape mismatch " +
                                           shape_string(mu.shape()) + " vs " +
                                           shape_string(sigma.shape()));
    for (const double v : sigma.data())
        check(v >= 0.0, "gaussian_sample: sigma must be non-negative");
    Tensor out = make(mu.shape(), mu.requires_grad() || sigma.requires_grad());
    auto eps = std::make_shared<std::vector<double>>(mu.size());
    for (size_t i = 0; i < mu.size(); ++i) {
        (*eps)[i] = rng.normal();
        out.data()[i] = mu.data()[i] + sigma.data()[i] * (*eps)[i];
    }
    auto mn = mu.node_, sn = sigma.node_, on = out.node_;
    record([mn, sn, on, eps] {
        if (mn->requires_grad)
            for (size_t i = 0; i < on->grad.size(); ++i) mn->grad[i] += on->grad[i];
        if (sn->requires_grad)
            for (size_t i = 0; i < on->grad.size(); ++i)
                sn->grad[i] += on->grad[i] * (*eps)[i];
    });
    return out;
}

void Tape::backward(const Tensor& loss) {
    if (!loss.defined() || loss.size() != 1)
        throw std::invalid_argument("backward: loss must be a defined scalar");
    if (!loss.requires_grad())
        throw std::invalid_argument("backward: loss is detached from the graph");
    loss.node_->grad[0] += 1.0;
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) it->backward();
}

void adam_step(std::vector<Tensor>& params, AdamState& state,
               const AdamConfig& cfg) {
    if (state.m.empty()) {
        state.m.resize(params.size());
        state.v.resize(params.size());
        for (size_t i = 0; i < params.size(); ++i) {
            state.m[i].assign(params[i].size(), 0.0);
            state.v[i].assign(params[i].size(), 0.0);
        }
    }
    if (state.m.size() != params.size())
        throw std::invalid_argument("adam_step: state/parameter count mismatch");
    ++state.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (size_t i = 0; i < params.size(); ++i) {
        if (state.m[i].size() != params[i].size())
            throw std::invalid_argument("adam_step: parameter shape drift at index " +
                                        std::to_string(i));
        auto& p = params[i].data();
        const auto& g = params[i].grad();
        auto& m = state.m[i];
        auto& v = state.v[i];
        for (size_t j = 0; j < p.size(); ++j) {
            m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
            v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            p[j] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

void zero_grads(std::vector<Tensor>& params) {
    for (auto& p : params) std::fill(p.grad().begin(), p.grad().end(), 0.0);
}

}  // namespace rcc::ad
