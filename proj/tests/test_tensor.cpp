#include <cmath>
#include <functional>
#include <vector>

#include "doctest.h"
#include "rcc/rng.hpp"
#include "rcc/tensor.hpp"

using namespace rcc;
using ad::Tape;
using ad::Tensor;

namespace {

// Central finite differences against the recorded backward pass. The builder
// must be a pure function of the leaf values (recreate any Rng inside it).
void check_grads(Tape& tape, std::vector<Tensor> leaves,
                 const std::function<Tensor(Tape&)>& build, double h = 1e-4,
                 double tol = 1e-4) {
    tape.clear();
    const Tensor loss = build(tape);
    for (auto& l : leaves) std::fill(l.grad().begin(), l.grad().end(), 0.0);
    tape.backward(loss);
    std::vector<std::vector<double>> analytic;
    for (auto& l : leaves) analytic.push_back(l.grad());

    for (size_t li = 0; li < leaves.size(); ++li) {
        for (size_t i = 0; i < leaves[li].size(); ++i) {
            const double orig = leaves[li].data()[i];
            leaves[li].data()[i] = orig + h;
            tape.clear();
            const double up = build(tape).scalar();
            leaves[li].data()[i] = orig - h;
            tape.clear();
            const double dn = build(tape).scalar();
            leaves[li].data()[i] = orig;
            const double numeric = (up - dn) / (2.0 * h);
            const double a = analytic[li][i];
            const double denom =
                std::max({std::fabs(a), std::fabs(numeric), 1e-3});
            INFO("leaf ", li, " index ", i, " analytic ", a, " numeric ",
                 numeric);
            CHECK(std::fabs(a - numeric) / denom < tol);
        }
    }
    tape.clear();
}

Tensor rand_leaf(Tape& tape, Rng& rng, std::vector<size_t> shape,
                 double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(ad::shape_numel(shape));
    for (auto& x : v) x = rng.uniform(lo, hi);
    return tape.leaf(std::move(shape), std::move(v), true);
}

}  // namespace

TEST_CASE("gradients: matmul, add, sub, mul, scale, transpose") {
    Tape tape;
    Rng rng(1);
    const Tensor a = rand_leaf(tape, rng, {3, 4});
    const Tensor b = rand_leaf(tape, rng, {4, 2});
    const Tensor c = rand_leaf(tape, rng, {3, 2});
    check_grads(tape, {a, b, c}, [&](Tape& t) {
        const Tensor m = t.matmul(a, b);
        const Tensor s = t.mul(t.add(m, c), t.sub(m, t.scale(c, 0.5)));
        return t.sum(t.transpose2(s));
    });
}

TEST_CASE("gradients: row and channel bias broadcasts") {
    Tape tape;
    Rng rng(2);
    const Tensor x = rand_leaf(tape, rng, {4, 3});
    const Tensor bias = rand_leaf(tape, rng, {3});
    check_grads(tape, {x, bias},
                [&](Tape& t) { return t.sum(t.add_rowwise(x, bias)); });
    const Tensor xc = rand_leaf(tape, rng, {2, 3, 5});
    check_grads(tape, {xc, bias}, [&](Tape& t) {
        return t.mean(t.add_channelwise(xc, bias));
    });
}

TEST_CASE("gradients: concat, slice, reshape") {
    Tape tape;
    Rng rng(3);
    const Tensor a = rand_leaf(tape, rng, {2, 3});
    const Tensor b = rand_leaf(tape, rng, {2, 2});
    check_grads(tape, {a, b}, [&](Tape& t) {
        const Tensor c = t.concat({a, b}, 1);           // (2,5)
        const Tensor s = t.slice(c, 1, 1, 3);           // (2,3)
        return t.sum(t.mul(t.reshape(s, {3, 2}), t.reshape(s, {3, 2})));
    });
}

TEST_CASE("gradients: activations") {
    Tape tape;
    Rng rng(4);
    // keep values away from the relu kink
    std::vector<double> v(12);
    for (auto& x : v) {
        x = rng.uniform(-1.0, 1.0);
        if (std::fabs(x) < 0.05) x += 0.1;
    }
    const Tensor x = tape.leaf({3, 4}, v, true);
    check_grads(tape, {x}, [&](Tape& t) { return t.sum(t.relu(x)); });
    check_grads(tape, {x}, [&](Tape& t) { return t.sum(t.tanh_act(x)); });
    check_grads(tape, {x}, [&](Tape& t) { return t.sum(t.softplus(x)); });
    check_grads(tape, {x}, [&](Tape& t) {
        const Tensor s = t.softmax_last(x);
        return t.sum(t.mul(s, s));  // non-trivial upstream gradient
    });
}

TEST_CASE("gradients: conv1d over weights, bias and input") {
    Tape tape;
    Rng rng(5);
    const Tensor x = rand_leaf(tape, rng, {2, 3, 7});
    const Tensor w = rand_leaf(tape, rng, {4, 3, 3});
    const Tensor b = rand_leaf(tape, rng, {4});
    check_grads(tape, {x, w, b}, [&](Tape& t) {
        const Tensor y = t.conv1d(x, w, b);
        return t.sum(t.mul(y, y));
    });
}

TEST_CASE("gradients: batch norm in training mode") {
    Tape tape;
    Rng rng(6);
    const Tensor x = rand_leaf(tape, rng, {5, 3, 4});
    const Tensor gamma = rand_leaf(tape, rng, {3}, 0.5, 1.5);
    const Tensor beta = rand_leaf(tape, rng, {3});
    std::vector<double> rm(3, 0.0), rv(3, 1.0);
    check_grads(tape, {x, gamma, beta}, [&](Tape& t) {
        const Tensor y = t.batch_norm(x, gamma, beta, rm, rv, 0.22, 1e-2, true);
        return t.sum(t.mul(y, y));
    });
}

TEST_CASE("gradients: resampling ops") {
    Tape tape;
    Rng rng(7);
    const Tensor x = rand_leaf(tape, rng, {2, 2, 5});
    check_grads(tape, {x}, [&](Tape& t) {
        const Tensor y = t.upsample_linear2(x);
        return t.sum(t.mul(y, y));
    });
    check_grads(tape, {x}, [&](Tape& t) {
        const Tensor y = t.downsample_avg2(x);
        return t.sum(t.mul(y, y));
    });
}

TEST_CASE("gradients: stochastic ops with frozen noise") {
    Tape tape;
    Rng rng(8);
    const Tensor logits = rand_leaf(tape, rng, {3, 4});
    check_grads(tape, {logits}, [&](Tape& t) {
        Rng noise(123);  // same Gumbel draws on every rebuild
        const Tensor y = t.gumbel_softmax(logits, 0.8, noise);
        return t.sum(t.mul(y, y));
    });
    const Tensor mu = rand_leaf(tape, rng, {3, 4});
    const Tensor sigma = rand_leaf(tape, rng, {3, 4}, 0.2, 1.0);
    check_grads(tape, {mu, sigma}, [&](Tape& t) {
        Rng noise(321);
        const Tensor y = t.gaussian_sample(mu, sigma, noise);
        return t.sum(t.mul(y, y));
    });
}

TEST_CASE("value checks: conv1d zero-padding by hand") {
    Tape tape;
    const Tensor x = tape.constant({1, 1, 3}, {1.0, 2.0, 3.0});
    const Tensor w = tape.leaf({1, 1, 3}, {0.5, 1.0, -1.0}, false);
    const Tensor b = tape.leaf({1}, {0.25}, false);
    const Tensor y = tape.conv1d(x, w, b);
    // position 0: 0*0.5 + 1*1 - 2 + 0.25, etc.
    CHECK(y.data()[0] == doctest::Approx(1.0 - 2.0 + 0.25));
    CHECK(y.data()[1] == doctest::Approx(0.5 + 2.0 - 3.0 + 0.25));
    CHECK(y.data()[2] == doctest::Approx(1.0 + 3.0 + 0.25));
}

TEST_CASE("value checks: resampling by hand") {
    Tape tape;
    const Tensor x = tape.constant({1, 1, 3}, {2.0, 4.0, 8.0});
    const Tensor up = tape.upsample_linear2(x);
    CHECK(up.data() == std::vector<double>{2.0, 3.0, 4.0, 6.0, 8.0, 8.0});
    const Tensor down = tape.downsample_avg2(x);
    CHECK(down.data() == std::vector<double>{3.0, 8.0});
}

TEST_CASE("value checks: batch norm statistics and running update") {
    Tape tape;
    const Tensor x = tape.constant({4, 1}, {1.0, 2.0, 3.0, 4.0});
    const Tensor gamma = tape.leaf({1}, {1.0}, false);
    const Tensor beta = tape.leaf({1}, {0.0}, false);
    std::vector<double> rm(1, 0.0), rv(1, 1.0);
    const Tensor y = tape.batch_norm(x, gamma, beta, rm, rv, 0.22, 1e-2, true);
    double mean = 0.0;
    for (const double v : y.data()) mean += v;
    CHECK(mean == doctest::Approx(0.0).scale(1.0));
    // running = (1 - momentum) * old + momentum * batch
    CHECK(rm[0] == doctest::Approx(0.22 * 2.5));
    CHECK(rv[0] == doctest::Approx(0.78 * 1.0 + 0.22 * 1.25));
    // eval mode consumes the running statistics instead of the batch
    const Tensor z = tape.batch_norm(x, gamma, beta, rm, rv, 0.22, 1e-2, false);
    CHECK(z.data()[0] ==
          doctest::Approx((1.0 - rm[0]) / std::sqrt(rv[0] + 1e-2)));
}

TEST_CASE("value checks: gumbel softmax simplex and tau validation") {
    Tape tape;
    Rng rng(10);
    const Tensor logits = tape.constant({5, 3}, std::vector<double>(15, 0.3));
    const Tensor y = tape.gumbel_softmax(logits, 0.16, rng);
    for (size_t r = 0; r < 5; ++r) {
        double s = 0.0;
        for (size_t c = 0; c < 3; ++c) s += y.data()[r * 3 + c];
        CHECK(s == doctest::Approx(1.0));
    }
    CHECK_THROWS(tape.gumbel_softmax(logits, 0.0, rng));
}

TEST_CASE("value checks: gaussian sampling degenerates to mu at sigma zero") {
    Tape tape;
    Rng rng(11);
    const Tensor mu = tape.constant({2, 2}, {1.0, 2.0, 3.0, 4.0});
    const Tensor zero = tape.constant({2, 2}, std::vector<double>(4, 0.0));
    const Tensor y = tape.gaussian_sample(mu, zero, rng);
    CHECK(y.data() == mu.data());
    const Tensor neg = tape.constant({2, 2}, std::vector<double>(4, -1.0));
    CHECK_THROWS(tape.gaussian_sample(mu, neg, rng));
}

TEST_CASE("backward accumulates over reuse and leaves survive clear") {
    Tape tape;
    Tensor x = tape.leaf({2}, {3.0, 5.0}, true);
    Tensor loss = tape.sum(tape.add(x, x));
    tape.backward(loss);
    CHECK(x.grad() == std::vector<double>{2.0, 2.0});
    tape.clear();
    CHECK(x.data() == std::vector<double>{3.0, 5.0});
    std::fill(x.grad().begin(), x.grad().end(), 0.0);
    loss = tape.sum(tape.mul(x, x));
    tape.backward(loss);
    CHECK(x.grad() == std::vector<double>{6.0, 10.0});
}

TEST_CASE("shape validation raises") {
    Tape tape;
    const Tensor a = tape.zeros({2, 3}, false);
    const Tensor b = tape.zeros({2, 2}, false);
    CHECK_THROWS(tape.add(a, b));
    CHECK_THROWS(tape.matmul(a, a));
    CHECK_THROWS(tape.backward(a));  // loss must be scalar
    const Tensor w_even = tape.zeros({1, 3, 2}, false);
    CHECK_THROWS(tape.conv1d(tape.zeros({1, 3, 5}, false), w_even,
                             tape.zeros({1}, false)));
}

TEST_CASE("adam matches the hand recurrence") {
    Tape tape;
    Tensor p = tape.leaf({2}, {1.0, -2.0}, true);
    std::vector<Tensor> params = {p};
    ad::AdamState state;
    ad::AdamConfig cfg;  // lr 1.2e-4, beta1 0, beta2 0.85
    // independent oracle for three steps with a fixed gradient
    double hp[2] = {1.0, -2.0};
    double m[2] = {0, 0}, v[2] = {0, 0};
    const double g[2] = {0.4, -0.7};
    for (int t = 1; t <= 3; ++t) {
        p.grad()[0] = g[0];
        p.grad()[1] = g[1];
        ad::adam_step(params, state, cfg);
        for (int i = 0; i < 2; ++i) {
            m[i] = cfg.beta1 * m[i] + (1 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1 - cfg.beta2) * g[i] * g[i];
            const double mh = m[i] / (1 - std::pow(cfg.beta1, t));
            const double vh = v[i] / (1 - std::pow(cfg.beta2, t));
            hp[i] -= cfg.lr * mh / (std::sqrt(vh) + cfg.eps);
            CHECK(p.data()[i] == doctest::Approx(hp[i]).epsilon(1e-12));
        }
    }
    ad::zero_grads(params);
    CHECK(p.grad() == std::vector<double>{0.0, 0.0});
}
