#include <cmath>

#include "doctest.h"
#include "rcc/nets.hpp"

using namespace rcc;
using ad::Tape;
using ad::Tensor;

namespace {

std::vector<LayoutSegment> toy_segments() {
    // continuous column (2 modes + scalar), 3-way one-hot, binary one-hot
    return {{0, 0, 2, SegmentKind::ModeSelect},
            {0, 2, 1, SegmentKind::Scalar},
            {1, 3, 3, SegmentKind::OneHot},
            {2, 6, 2, SegmentKind::OneHot}};
}

GeneratorConfig small_cfg() {
    GeneratorConfig cfg;
    cfg.d_z = 12;
    cfg.bin_len = 4;
    cfg.varpi = 4;
    cfg.filters = 4;
    cfg.channel_len = 8;
    return cfg;
}

Tensor normal_tensor(Tape& tape, Rng& rng, size_t n, size_t w) {
    std::vector<double> v(n * w);
    for (auto& x : v) x = rng.normal();
    return tape.constant({n, w}, std::move(v));
}

Tensor uniform_tensor(Tape& tape, Rng& rng, size_t n, size_t w) {
    std::vector<double> v(n * w);
    for (auto& x : v) x = rng.uniform();
    return tape.constant({n, w}, std::move(v));
}

}  // namespace

TEST_CASE("generator output obeys the segment activations") {
    Tape tape;
    Generator gen(tape, small_cfg(), 5, toy_segments(), 8, 1);
    Rng rng(2);
    const Tensor z = normal_tensor(tape, rng, 6, 12);
    const Tensor cond = uniform_tensor(tape, rng, 6, 5);
    Rng fwd(3);
    const GeneratorOutput out = gen.forward(tape, z, cond, fwd, true);
    REQUIRE(out.sampled.shape() == std::vector<size_t>{6, 8});
    for (size_t r = 0; r < 6; ++r) {
        const double* row = out.sampled.data().data() + r * 8;
        // mode-select simplex
        CHECK(row[0] + row[1] == doctest::Approx(1.0));
        CHECK(row[0] >= 0.0);
        // scalar squashed by tanh
        CHECK(std::fabs(row[2]) < 1.0);
        // one-hot segments mapped onto [-1,1] with total 2 - width
        CHECK(row[3] + row[4] + row[5] == doctest::Approx(2.0 - 3.0));
        for (int j = 3; j < 8; ++j) {
            CHECK(row[j] >= -1.0);
            CHECK(row[j] <= 1.0);
        }
        CHECK(row[6] + row[7] == doctest::Approx(2.0 - 2.0));
    }
    for (const double s : out.sigma.data()) CHECK(s > 0.0);
}

TEST_CASE("generator is deterministic given seeds") {
    Tape tape;
    Generator g1(tape, small_cfg(), 5, toy_segments(), 8, 42);
    Generator g2(tape, small_cfg(), 5, toy_segments(), 8, 42);
    Rng rng(5);
    const Tensor z = normal_tensor(tape, rng, 4, 12);
    const Tensor cond = uniform_tensor(tape, rng, 4, 5);
    Rng f1(9), f2(9);
    const auto o1 = g1.forward(tape, z, cond, f1, true);
    const auto o2 = g2.forward(tape, z, cond, f2, true);
    CHECK(o1.sampled.data() == o2.sampled.data());
}

TEST_CASE("shared projection keeps the parameter count independent of varpi") {
    Tape tape;
    GeneratorConfig narrow = small_cfg();
    GeneratorConfig wide = small_cfg();
    wide.varpi = 8;
    Generator g_narrow(tape, narrow, 5, toy_segments(), 8, 1);
    Generator g_wide(tape, wide, 5, toy_segments(), 8, 1);
    // the only width-dependent pieces are the residual input projections
    size_t n_narrow = 0, n_wide = 0;
    for (const auto& p : g_narrow.named_params())
        if (p.name.rfind("lin", 0) == 0) n_narrow += p.tensor.size();
    for (const auto& p : g_wide.named_params())
        if (p.name.rfind("lin", 0) == 0) n_wide += p.tensor.size();
    CHECK(n_narrow == n_wide);
}

TEST_CASE("identical bins produce identical channel rows") {
    // With d_z == bin_len every channel slot reads the same bin, so the
    // pre-residual channels coincide; verify via the varpi-invariance of the
    // first residual input by checking two equal-slot generators agree.
    Tape tape;
    GeneratorConfig cfg = small_cfg();
    cfg.d_z = 4;
    cfg.bin_len = 4;
    Generator gen(tape, cfg, 0, toy_segments(), 8, 7);
    Rng rng(11);
    const Tensor z = normal_tensor(tape, rng, 3, 4);
    Rng f1(13), f2(13);
    const auto a = gen.forward(tape, z, Tensor(), f1, false);
    const auto b = gen.forward(tape, z, Tensor(), f2, false);
    CHECK(a.mu.data() == b.mu.data());
}

TEST_CASE("ablation switches preserve output shapes") {
    Tape tape;
    Rng rng(17);
    for (const int variant : {0, 1, 2, 3}) {
        GeneratorConfig cfg = small_cfg();
        cfg.ablate_middle_residual = variant == 1;
        cfg.disable_skip_lr = variant == 2;
        cfg.disable_skip_rr = variant == 3;
        Generator gen(tape, cfg, 5, toy_segments(), 8, 23);
        const Tensor z = normal_tensor(tape, rng, 2, 12);
        const Tensor cond = uniform_tensor(tape, rng, 2, 5);
        Rng fwd(29);
        const auto out = gen.forward(tape, z, cond, fwd, true);
        CHECK(out.sampled.shape() == std::vector<size_t>{2, 8});
        for (const double v : out.sampled.data()) CHECK(std::isfinite(v));
    }
}

TEST_CASE("generator config validation") {
    Tape tape;
    GeneratorConfig odd = small_cfg();
    odd.varpi = 3;
    CHECK_THROWS(Generator(tape, odd, 5, toy_segments(), 8, 1));
    auto gaps = toy_segments();
    gaps[1].offset = 4;  // hole in the layout
    CHECK_THROWS(Generator(tape, small_cfg(), 5, gaps, 8, 1));
}

TEST_CASE("discriminator scores one scalar per row") {
    Tape tape;
    Discriminator d(tape, {}, 8, 5, 31);
    Rng rng(37);
    const Tensor rows = normal_tensor(tape, rng, 6, 8);
    const Tensor cond = uniform_tensor(tape, rng, 6, 5);
    const Tensor scores = d.forward(tape, rows, cond, true);
    CHECK(scores.shape() == std::vector<size_t>{6, 1});
    CHECK_THROWS(d.forward(tape, normal_tensor(tape, rng, 6, 7), cond, true));
}

TEST_CASE("gradients reach every generator and critic parameter") {
    Tape tape;
    Generator gen(tape, small_cfg(), 5, toy_segments(), 8, 3);
    Discriminator disc(tape, {4, 4, 8, 3, 0.22, 1e-2}, 8, 5, 5);
    Rng rng(41);
    const Tensor z = normal_tensor(tape, rng, 4, 12);
    const Tensor cond = uniform_tensor(tape, rng, 4, 5);
    Rng fwd(43);
    const auto out = gen.forward(tape, z, cond, fwd, true);
    const Tensor loss = tape.mean(disc.forward(tape, out.sampled, cond, true));
    tape.backward(loss);
    for (const auto& p : gen.named_params()) {
        double norm = 0.0;
        for (const double g : p.tensor.grad()) norm += std::fabs(g);
        INFO("generator param ", p.name);
        CHECK(norm > 0.0);
    }
    for (const auto& p : disc.named_params()) {
        double norm = 0.0;
        for (const double g : p.tensor.grad()) norm += std::fabs(g);
        INFO("critic param ", p.name);
        CHECK(norm > 0.0);
    }
}

TEST_CASE("state serialization round-trips the forward pass") {
    Tape tape;
    Generator gen(tape, small_cfg(), 5, toy_segments(), 8, 47);
    const std::string blob = gen.state_to_json();
    Generator loaded = Generator::state_from_json(tape, blob);
    CHECK(loaded.state_to_json() == blob);
    Rng rng(53);
    const Tensor z = normal_tensor(tape, rng, 3, 12);
    const Tensor cond = uniform_tensor(tape, rng, 3, 5);
    Rng f1(59), f2(59);
    const auto a = gen.forward(tape, z, cond, f1, false);
    const auto b = loaded.forward(tape, z, cond, f2, false);
    CHECK(a.sampled.data() == b.sampled.data());

    Discriminator disc(tape, {}, 8, 5, 61);
    Discriminator dl = Discriminator::state_from_json(tape, disc.state_to_json());
    CHECK(dl.state_to_json() == disc.state_to_json());
    const Tensor rows = normal_tensor(tape, rng, 3, 8);
    CHECK(disc.forward(tape, rows, cond, false).data() ==
          dl.forward(tape, rows, cond, false).data());
}

TEST_CASE("weight matrix views cover the 2D parameters") {
    Tape tape;
    Generator gen(tape, small_cfg(), 5, toy_segments(), 8, 67);
    for (const auto& wm : gen.weight_matrices()) {
        CHECK(wm.rows * wm.cols == wm.tensor.size());
        CHECK(wm.rows > 0);
    }
    Discriminator disc(tape, {}, 8, 5, 71);
    CHECK(disc.weight_matrices().size() == 4);  // three convs + head
}
