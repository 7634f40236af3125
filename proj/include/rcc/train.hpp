#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rcc/cond.hpp"
#include "rcc/monitor.hpp"
#include "rcc/nets.hpp"
#include "rcc/tensor.hpp"

namespace rcc {

// Wasserstein-style critic objectives on per-row scores.
double critic_loss(const std::vector<double>& real_scores,
                   const std::vector<double>& fake_scores);
double generator_loss(const std::vector<double>& fake_scores);

// Half-width of the admissible band around the reference spectral sum:
// 1 + median of the singular values (even count -> midpoint).
double compute_vartheta(const std::vector<double>& spectrum);

struct RegularizerState {
    bool initialized = false;
    double t_ref = 0.0;    // reference spectral sum
    double vartheta = 0.0; // band half-width
};

struct RegularizerReport {
    double sum_lambda = 0.0;  // after any projection
    double vartheta = 0.0;
    bool projected = false;
    bool skipped = false;  // zero spectral sum
    double scale = 1.0;
    std::vector<double> spectrum;  // after any projection
};

// Checks the spectral sum of one weight matrix against
// [t_ref - vartheta, t_ref + vartheta]; on violation rescales the weights so
// the sum lands exactly on the violated endpoint, then refreshes the state
// from the projected spectrum. The first call only initializes the state. A
// zero spectral sum is skipped with a warning on stderr.
RegularizerReport apply_regularizer(const WeightMatrix& weights,
                                    RegularizerState& state);

struct TrainConfig {
    long iterations = 2000;
    size_t batch_size = 64;
    int d_steps = 1;        // critic updates per generator update
    size_t disc_count = 1;  // critics; scores are averaged
    int monitor_every = 10;
    bool regularize = true;
    double weight_clip = 0.0;  // > 0 clamps critic weights (ablation)
    int cantor_depth = kDefaultCantorDepth;
    uint64_t seed = 0;
    ad::AdamConfig adam_g;
    ad::AdamConfig adam_d;
    GeneratorConfig gen;
    DiscriminatorConfig disc;
};

struct TrainResult {
    Generator generator;
    std::vector<Discriminator> critics;
    std::vector<SvdSnapshot> monitor;  // per critic layer, every monitor_every
    std::vector<double> d_loss_trace;
    std::vector<double> g_loss_trace;
    long iterations_run = 0;
};

// Adversarial training on encoded rows. The schema drives the width of the
// compound condition vector (one Cantor draw per discrete/binary one-hot
// slot, independent streams). Deterministic for a fixed config and seed.
// Throws when a loss turns non-finite, reporting the iteration.
TrainResult train(ad::Tape& tape,
                  const std::vector<std::vector<double>>& encoded_rows,
                  const std::vector<ColumnSchema>& schema,
                  const std::vector<LayoutSegment>& segments,
                  size_t row_width, const TrainConfig& cfg);

// Draws n encoded rows from a trained generator in eval mode; deterministic
// for a fixed seed.
std::vector<std::vector<double>> synthesize_encoded(
    ad::Tape& tape, Generator& gen, const std::vector<ColumnSchema>& schema,
    size_t n, int cantor_depth, uint64_t seed, size_t batch = 64);

}  // namespace rcc
