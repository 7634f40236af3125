#include <cmath>
#include <numeric>

#include "doctest.h"
#include "rcc/monitor.hpp"
#include "rcc/train.hpp"

using namespace rcc;
using ad::Tape;
using ad::Tensor;

namespace {

std::vector<ColumnSchema> tiny_schema() {
    return {{"x", ColumnKind::Continuous, {}, std::nullopt},
            {"flag", ColumnKind::Binary, {"n", "y"}, std::nullopt}};
}

std::vector<LayoutSegment> tiny_segments() {
    return {{0, 0, 2, SegmentKind::ModeSelect},
            {0, 2, 1, SegmentKind::Scalar},
            {1, 3, 2, SegmentKind::OneHot}};
}

std::vector<std::vector<double>> tiny_rows(size_t n) {
    Rng rng(101);
    std::vector<std::vector<double>> rows;
    for (size_t i = 0; i < n; ++i) {
        const bool m = rng.uniform() < 0.5;
        const bool f = rng.uniform() < 0.5;
        rows.push_back({m ? 1.0 : 0.0, m ? 0.0 : 1.0, rng.uniform(-0.8, 0.8),
                        f ? -1.0 : 1.0, f ? 1.0 : -1.0});
    }
    return rows;
}

TrainConfig tiny_config(long iterations) {
    TrainConfig cfg;
    cfg.iterations = iterations;
    cfg.batch_size = 8;
    cfg.monitor_every = 5;
    cfg.seed = 7;
    cfg.gen.d_z = 8;
    cfg.gen.bin_len = 4;
    cfg.gen.varpi = 4;
    cfg.gen.filters = 3;
    cfg.gen.channel_len = 4;
    cfg.disc.filters1 = 4;
    cfg.disc.filters2 = 4;
    cfg.disc.filters3 = 6;
    return cfg;
}

}  // namespace

TEST_CASE("adversarial losses by hand") {
    CHECK(critic_loss({1.0, 3.0}, {0.5, 1.5}) == doctest::Approx(1.0 - 2.0));
    CHECK(generator_loss({0.5, 1.5}) == doctest::Approx(-1.0));
    CHECK_THROWS(critic_loss({}, {1.0}));
    CHECK_THROWS(generator_loss({}));
}

TEST_CASE("band half-width is one plus the spectrum median") {
    CHECK(compute_vartheta({3.0, 1.0, 2.0}) == doctest::Approx(1.0 + 2.0));
    // even count takes the midpoint of the central pair
    CHECK(compute_vartheta({4.0, 1.0, 2.0, 3.0}) == doctest::Approx(1.0 + 2.5));
    CHECK_THROWS(compute_vartheta({}));
}

TEST_CASE("spectral projection clamps to the violated endpoint") {
    Tape tape;
    Tensor w = tape.leaf({3, 3},
                         {1.0, 0.2, 0.0, 0.1, 0.8, 0.0, 0.0, 0.0, 1.2}, true);
    const WeightMatrix wm{"w", w, 3, 3};
    RegularizerState state;
    const auto first = apply_regularizer(wm, state);
    CHECK_FALSE(first.projected);
    CHECK(state.initialized);
    CHECK(state.t_ref == doctest::Approx(first.sum_lambda));
    CHECK(state.vartheta == doctest::Approx(compute_vartheta(first.spectrum)));

    // inflate far past the band and verify the projection lands on it
    for (double& v : w.data()) v *= 10.0;
    const double hi = state.t_ref + state.vartheta;
    const auto second = apply_regularizer(wm, state);
    CHECK(second.projected);
    CHECK(second.scale < 1.0);
    // independent check of the projected spectral sum
    const auto sv = svd_spectrum(w.data(), 3, 3);
    CHECK(std::accumulate(sv.begin(), sv.end(), 0.0) ==
          doctest::Approx(hi).epsilon(1e-9));
    // state refreshed from the projected spectrum
    CHECK(state.t_ref == doctest::Approx(hi).epsilon(1e-9));

    // idempotent: an immediate re-application does nothing
    const auto third = apply_regularizer(wm, state);
    CHECK_FALSE(third.projected);
    CHECK(third.scale == 1.0);
}

TEST_CASE("projection also pushes a collapsed spectrum back up") {
    Tape tape;
    Tensor w = tape.leaf({2, 2}, {5.0, 0.0, 0.0, 4.0}, true);
    const WeightMatrix wm{"w", w, 2, 2};
    RegularizerState state;
    apply_regularizer(wm, state);  // t_ref 9, vartheta 1 + 4.5
    for (double& v : w.data()) v *= 0.01;  // sum 0.09 < 9 - 5.5
    const auto rep = apply_regularizer(wm, state);
    CHECK(rep.projected);
    CHECK(rep.scale > 1.0);
    CHECK(rep.sum_lambda == doctest::Approx(9.0 - 5.5));
}

TEST_CASE("zero weights are skipped with a warning, not projected") {
    Tape tape;
    Tensor w = tape.zeros({2, 2}, true);
    RegularizerState state;
    const auto rep = apply_regularizer({"w", w, 2, 2}, state);
    CHECK(rep.skipped);
    CHECK_FALSE(rep.projected);
    CHECK_FALSE(state.initialized);
}

TEST_CASE("short training run is deterministic and monitored") {
    const auto rows = tiny_rows(64);
    Tape tape;
    const TrainConfig cfg = tiny_config(12);
    TrainResult r1 = train(tape, rows, tiny_schema(), tiny_segments(), 5, cfg);
    CHECK(r1.iterations_run == 12);
    CHECK(r1.d_loss_trace.size() == 12);
    for (const double v : r1.d_loss_trace) CHECK(std::isfinite(v));
    // snapshots on iterations 5 and 10 for four critic layers
    CHECK(r1.monitor.size() == 2 * 4);
    for (const auto& s : r1.monitor) {
        CHECK((s.iteration == 5 || s.iteration == 10));
        CHECK(s.metric > 0.0);
    }
    Tape tape2;
    TrainResult r2 = train(tape2, rows, tiny_schema(), tiny_segments(), 5, cfg);
    CHECK(r1.d_loss_trace == r2.d_loss_trace);
    CHECK(r1.g_loss_trace == r2.g_loss_trace);
    CHECK(r1.generator.state_to_json() == r2.generator.state_to_json());
}

TEST_CASE("regularized training keeps every layer inside its band") {
    const auto rows = tiny_rows(64);
    Tape tape;
    TrainConfig cfg = tiny_config(20);
    cfg.monitor_every = 1;
    const TrainResult r = train(tape, rows, tiny_schema(), tiny_segments(), 5, cfg);
    // replay the band from the snapshots: after the first observation, every
    // post-step spectral sum must sit inside [t_ref - vartheta, t_ref + vartheta]
    std::map<std::string, RegularizerState> bands;
    for (const auto& s : r.monitor) {
        CHECK(s.vartheta >= 1.0);  // 1 + a nonnegative median
        auto& band = bands[s.layer];
        if (!band.initialized) {
            band.initialized = true;
            band.t_ref = s.trace_surrogate;
        } else {
            CHECK(s.trace_surrogate >= band.t_ref - band.vartheta - 1e-9);
            CHECK(s.trace_surrogate <= band.t_ref + band.vartheta + 1e-9);
            if (s.projected) band.t_ref = s.trace_surrogate;
        }
        band.vartheta = s.vartheta;
    }
}

TEST_CASE("multiple critics train and are persisted independently") {
    const auto rows = tiny_rows(32);
    Tape tape;
    TrainConfig cfg = tiny_config(4);
    cfg.disc_count = 2;
    const TrainResult r = train(tape, rows, tiny_schema(), tiny_segments(), 5, cfg);
    REQUIRE(r.critics.size() == 2);
    CHECK(r.critics[0].state_to_json() != r.critics[1].state_to_json());
}

TEST_CASE("weight clipping ablation clamps the critic parameters") {
    const auto rows = tiny_rows(32);
    Tape tape;
    TrainConfig cfg = tiny_config(4);
    cfg.regularize = false;
    cfg.weight_clip = 0.05;
    const TrainResult r = train(tape, rows, tiny_schema(), tiny_segments(), 5, cfg);
    for (const auto& p : r.critics[0].named_params())
        for (const double v : p.tensor.data()) CHECK(std::fabs(v) <= 0.05);
}

TEST_CASE("synthesis is deterministic and respects the requested count") {
    const auto rows = tiny_rows(32);
    Tape tape;
    TrainResult r = train(tape, rows, tiny_schema(), tiny_segments(), 5,
                          tiny_config(3));
    const auto s1 = synthesize_encoded(tape, r.generator, tiny_schema(), 10,
                                       32, 99, 8);
    const auto s2 = synthesize_encoded(tape, r.generator, tiny_schema(), 10,
                                       32, 99, 8);
    CHECK(s1.size() == 10);
    CHECK(s1 == s2);
    const auto s3 = synthesize_encoded(tape, r.generator, tiny_schema(), 10,
                                       32, 100, 8);
    CHECK(s1 != s3);
}

TEST_CASE("training validates its inputs") {
    Tape tape;
    CHECK_THROWS(train(tape, {}, tiny_schema(), tiny_segments(), 5,
                       tiny_config(1)));
    auto rows = tiny_rows(8);
    rows[3].pop_back();
    CHECK_THROWS(train(tape, rows, tiny_schema(), tiny_segments(), 5,
                       tiny_config(1)));
}
