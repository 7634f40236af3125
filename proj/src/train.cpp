#include "rcc/train.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <stdexcept>

namespace rcc {

using ad::Tape;
using ad::Tensor;

double critic_loss(const std::vector<double>& real_scores,
                   const std::vector<double>& fake_scores) {
    if (real_scores.empty() || fake_scores.empty())
        throw std::invalid_argument("critic_loss: empty score vector");
    const double mr =
        std::accumulate(real_scores.begin(), real_scores.end(), 0.0) /
        static_cast<double>(real_scores.size());
    const double mf =
        std::accumulate(fake_scores.begin(), fake_scores.end(), 0.0) /
        static_cast<double>(fake_scores.size());
    return mf - mr;
}

double generator_loss(const std::vector<double>& fake_scores) {
    if (fake_scores.empty())
        throw std::invalid_argument("generator_loss: empty score vector");
    return -std::accumulate(fake_scores.begin(), fake_scores.end(), 0.0) /
           static_cast<double>(fake_scores.size());
}

double compute_vartheta(const std::vector<double>& spectrum) {
    if (spectrum.empty())
        throw std::invalid_argument("compute_vartheta: empty spectrum");
    std::vector<double> sorted(spectrum);
    std::sort(sorted.begin(), sorted.end());
    const size_t n = sorted.size();
    const double median = (n % 2 == 1)
                              ? sorted[n / 2]
                              : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    return 1.0 + median;
}

RegularizerReport apply_regularizer(const WeightMatrix& weights,
                                    RegularizerState& state) {
    RegularizerReport report;
    report.spectrum =
        svd_spectrum(weights.tensor.data(), weights.rows, weights.cols);
    report.sum_lambda = std::accumulate(report.spectrum.begin(),
                                        report.spectrum.end(), 0.0);
    if (report.sum_lambda == 0.0) {
        std::cerr << "warning: zero spectral sum for layer " << weights.name
                  << "; projection skipped\n";
        report.skipped = true;
        report.vartheta = state.vartheta;
        return report;
    }
    if (!state.initialized) {
        state.t_ref = report.sum_lambda;
        state.vartheta = compute_vartheta(report.spectrum);
        state.initialized = true;
        report.vartheta = state.vartheta;
        return report;
    }
    const double lo = state.t_ref - state.vartheta;
    const double hi = state.t_ref + state.vartheta;
    if (report.sum_lambda > hi)
        report.scale = hi / report.sum_lambda;
    else if (report.sum_lambda < lo)
        report.scale = lo / report.sum_lambda;
    if (report.scale != 1.0) {
        Tensor t = weights.tensor;
        for (double& v : t.data()) v *= report.scale;
        for (double& sv : report.spectrum) sv *= report.scale;
        report.sum_lambda *= report.scale;
        report.projected = true;
        state.t_ref = report.sum_lambda;
        state.vartheta = compute_vartheta(report.spectrum);
    }
    report.vartheta = state.vartheta;
    return report;
}

namespace {

Tensor make_cond_tensor(Tape& tape, CondSampler& sampler, size_t n) {
    const size_t k = sampler.width();
    std::vector<double> data;
    data.reserve(n * k);
    for (size_t i = 0; i < n; ++i) {
        const auto v = sampler.next().concatenated();
        data.insert(data.end(), v.begin(), v.end());
    }
    return tape.constant({n, k}, std::move(data));
}

Tensor make_noise_tensor(Tape& tape, Rng& rng, size_t n, size_t d_z) {
    std::vector<double> data(n * d_z);
    for (double& v : data) v = rng.normal();
    return tape.constant({n, d_z}, std::move(data));
}

Tensor mean_critic_score(Tape& tape, std::vector<Discriminator>& critics,
                         const Tensor& rows, const Tensor& cond) {
    Tensor agg;
    for (auto& d : critics) {
        const Tensor s = d.forward(tape, rows, cond, true);
        agg = agg.defined() ? tape.add(agg, s) : s;
    }
    return tape.scale(agg, 1.0 / static_cast<double>(critics.size()));
}

void clip_weights(std::vector<Tensor>& params, double c) {
    for (auto& p : params)
        for (double& v : p.data()) v = std::clamp(v, -c, c);
}

}  // namespace

TrainResult train(Tape& tape,
                  const std::vector<std::vector<double>>& encoded_rows,
                  const std::vector<ColumnSchema>& schema,
                  const std::vector<LayoutSegment>& segments, size_t row_width,
                  const TrainConfig& cfg) {
    if (encoded_rows.empty())
        throw std::invalid_argument("train: no training rows");
    if (cfg.batch_size == 0 || cfg.iterations <= 0 || cfg.d_steps < 1 ||
        cfg.disc_count < 1 || cfg.monitor_every < 1)
        throw std::invalid_argument("train: bad configuration");
    for (const auto& r : encoded_rows)
        if (r.size() != row_width)
            throw std::invalid_argument("train: encoded row width mismatch");

    CondSampler cond_sampler(schema, cfg.cantor_depth,
                             derive_seed(cfg.seed, "train.cond"));
    Rng batch_rng(derive_seed(cfg.seed, "train.batch"));
    Rng noise_rng(derive_seed(cfg.seed, "train.noise"));

    TrainResult result;
    result.generator = Generator(tape, cfg.gen, cond_sampler.width(), segments,
                                 row_width, derive_seed(cfg.seed, "init.g"));
    for (size_t i = 0; i < cfg.disc_count; ++i)
        result.critics.emplace_back(
            tape, cfg.disc, row_width, cond_sampler.width(),
            derive_seed(cfg.seed, "init.d." + std::to_string(i)));

    auto g_params = result.generator.params();
    std::vector<Tensor> d_params;
    for (auto& d : result.critics)
        for (auto& p : d.params()) d_params.push_back(p);

    ad::AdamState g_adam, d_adam;
    std::map<std::string, RegularizerState> reg_states;

    const size_t n_rows = encoded_rows.size();
    const size_t nb = cfg.batch_size;
    const size_t k = cond_sampler.width();

    auto make_real = [&]() {
        std::vector<double> data;
        data.reserve(nb * row_width);
        for (size_t i = 0; i < nb; ++i) {
            const auto& row = encoded_rows[batch_rng.uniform_int(n_rows)];
            data.insert(data.end(), row.begin(), row.end());
        }
        return tape.constant({nb, row_width}, std::move(data));
    };

    auto make_fake_detached = [&]() {
        const Tensor z = make_noise_tensor(tape, noise_rng, nb, cfg.gen.d_z);
        const Tensor cond = make_cond_tensor(tape, cond_sampler, nb);
        const GeneratorOutput out =
            result.generator.forward(tape, z, cond, noise_rng, true);
        std::vector<double> rows = out.sampled.data();
        std::vector<double> conds = cond.data();
        return std::pair{std::move(rows), std::move(conds)};
    };

    for (long it = 0; it < cfg.iterations; ++it) {
        double d_loss_val = 0.0;
        for (int s = 0; s < cfg.d_steps; ++s) {
            tape.clear();
            auto [fake_rows, fake_conds] = make_fake_detached();
            tape.clear();
            const Tensor real = make_real();
            const Tensor real_cond = make_cond_tensor(tape, cond_sampler, nb);
            const Tensor fake = tape.constant({nb, row_width}, std::move(fake_rows));
            const Tensor fake_cond = tape.constant({nb, k}, std::move(fake_conds));
            const Tensor sr = mean_critic_score(tape, result.critics, real, real_cond);
            const Tensor sf = mean_critic_score(tape, result.critics, fake, fake_cond);
            const Tensor loss = tape.sub(tape.mean(sf), tape.mean(sr));
            d_loss_val = loss.scalar();
            if (!std::isfinite(d_loss_val))
                throw std::runtime_error(
                    "train: non-finite critic loss at iteration " +
                    std::to_string(it));
            tape.backward(loss);
            ad::adam_step(d_params, d_adam, cfg.adam_d);
            ad::zero_grads(d_params);
            if (cfg.weight_clip > 0.0) clip_weights(d_params, cfg.weight_clip);
        }

        tape.clear();
        const Tensor z = make_noise_tensor(tape, noise_rng, nb, cfg.gen.d_z);
        const Tensor cond = make_cond_tensor(tape, cond_sampler, nb);
        const GeneratorOutput gen_out =
            result.generator.forward(tape, z, cond, noise_rng, true);
        const Tensor scores =
            mean_critic_score(tape, result.critics, gen_out.sampled, cond);
        const Tensor g_loss = tape.scale(tape.mean(scores), -1.0);
        const double g_loss_val = g_loss.scalar();
        if (!std::isfinite(g_loss_val))
            throw std::runtime_error(
                "train: non-finite generator loss at iteration " +
                std::to_string(it));
        tape.backward(g_loss);
        ad::adam_step(g_params, g_adam, cfg.adam_g);
        ad::zero_grads(g_params);
        ad::zero_grads(d_params);

        result.d_loss_trace.push_back(d_loss_val);
        result.g_loss_trace.push_back(g_loss_val);

        // Spectral-band projection on the critic weights, then (on monitor
        // iterations) a snapshot of the post-projection spectra.
        const bool monitored = (it + 1) % cfg.monitor_every == 0;
        for (size_t ci = 0; ci < result.critics.size(); ++ci) {
            for (const auto& wm : result.critics[ci].weight_matrices()) {
                const std::string layer =
                    "d" + std::to_string(ci) + "." + wm.name;
                RegularizerReport rep;
                if (cfg.regularize) {
                    rep = apply_regularizer(wm, reg_states[layer]);
                } else if (monitored) {
                    rep.spectrum =
                        svd_spectrum(wm.tensor.data(), wm.rows, wm.cols);
                    rep.sum_lambda = std::accumulate(rep.spectrum.begin(),
                                                     rep.spectrum.end(), 0.0);
                }
                if (monitored) {
                    SvdSnapshot snap;
                    snap.iteration = it + 1;
                    snap.layer = layer;
                    snap.singular_values = rep.spectrum;
                    snap.metric = stability_metric(rep.spectrum, 0.1, 0.0);
                    snap.trace_surrogate = rep.sum_lambda;
                    snap.vartheta = rep.vartheta;
                    snap.projected = rep.projected;
                    result.monitor.push_back(std::move(snap));
                }
            }
        }
        ++result.iterations_run;
    }
    tape.clear();
    return result;
}

std::vector<std::vector<double>> synthesize_encoded(
    Tape& tape, Generator& gen, const std::vector<ColumnSchema>& schema,
    size_t n, int cantor_depth, uint64_t seed, size_t batch) {
    if (batch == 0) throw std::invalid_argument("synthesize_encoded: batch == 0");
    CondSampler cond_sampler(schema, cantor_depth,
                             derive_seed(seed, "sample.cond"));
    Rng noise_rng(derive_seed(seed, "sample.noise"));
    std::vector<std::vector<double>> rows;
    rows.reserve(n);
    const size_t w = gen.out_width();
    while (rows.size() < n) {
        tape.clear();
        const size_t take = std::min(batch, n - rows.size());
        const Tensor z = make_noise_tensor(tape, noise_rng, batch, gen.config().d_z);
        const Tensor cond = make_cond_tensor(tape, cond_sampler, batch);
        const GeneratorOutput out = gen.forward(tape, z, cond, noise_rng, false);
        const auto& data = out.sampled.data();
        for (size_t i = 0; i < take; ++i)
            rows.emplace_back(data.begin() + i * w, data.begin() + (i + 1) * w);
    }
    tape.clear();
    return rows;
}

}  // namespace rcc
