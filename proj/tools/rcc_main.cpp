#include <string>

#include "CLI11.hpp"
#include "rcc/artifacts.hpp"

int main(int argc, char** argv) {
    CLI::App app{"rcc: conditional adversarial synthesis for tabular data"};
    app.require_subcommand(1);

    rcc::FitArgs fit;
    auto* fit_cmd = app.add_subcommand("fit", "train a synthesizer on a CSV");
    fit_cmd->add_option("--data", fit.config.data_csv, "input CSV file");
    fit_cmd->add_option("--config", fit.config_path,
                        "load a persisted config.json (replaces other flags)");
    fit_cmd->add_option("--out", fit.out_dir, "output artifact directory")
        ->required();
    fit_cmd->add_option("--overrides", fit.config.overrides_path,
                        "schema override TSV");
    fit_cmd->add_option("--holdout-ratio", fit.config.holdout_ratio,
                        "fraction of rows held out for evaluation");
    fit_cmd->add_option("--iterations", fit.config.train.iterations,
                        "training iterations");
    fit_cmd->add_option("--batch-size", fit.config.train.batch_size);
    fit_cmd->add_option("--seed", fit.config.train.seed, "master seed");
    fit_cmd->add_option("--d-steps", fit.config.train.d_steps,
                        "critic updates per generator update");
    fit_cmd->add_option("--critics", fit.config.train.disc_count,
                        "number of critics (scores averaged)");
    fit_cmd->add_option("--monitor-every", fit.config.train.monitor_every);
    fit_cmd->add_flag("--no-regularize",
                      [&](size_t) { fit.config.train.regularize = false; },
                      "disable the spectral-band projection");
    fit_cmd->add_option("--weight-clip", fit.config.train.weight_clip,
                        "clamp critic weights to [-c, c] (ablation)");
    fit_cmd->add_option("--filters", fit.config.train.gen.filters,
                        "generator conv channel count");
    fit_cmd->add_option("--d-z", fit.config.train.gen.d_z, "noise width");
    fit_cmd->add_option("--gumbel-tau", fit.config.train.gen.gumbel_tau);
    fit_cmd->add_option("--mode-budget", fit.config.fit.mode_budget,
                        "max Gaussian modes per continuous column");
    fit_cmd->add_option("--epsilon", fit.config.fit.epsilon,
                        "min distance between shifted and original means");
    fit_cmd->add_flag("--ablate-middle-residual",
                      fit.config.train.gen.ablate_middle_residual);
    fit_cmd->add_flag("--disable-skip-lr", fit.config.train.gen.disable_skip_lr);
    fit_cmd->add_flag("--disable-skip-rr", fit.config.train.gen.disable_skip_rr);

    rcc::SampleArgs sample;
    auto* sample_cmd =
        app.add_subcommand("sample", "draw rows from a fitted model");
    sample_cmd->add_option("--model", sample.model_dir, "fit output directory")
        ->required();
    sample_cmd->add_option("--out", sample.out_csv, "output CSV")->required();
    sample_cmd->add_option("--rows", sample.rows, "rows to draw")->required();
    sample_cmd->add_option("--seed", sample.seed, "sampling seed");

    rcc::EvaluateArgs eval;
    auto* eval_cmd =
        app.add_subcommand("evaluate", "compare synthetic rows to real rows");
    eval_cmd->add_option("--real", eval.real_csv, "real CSV")->required();
    eval_cmd->add_option("--synth", eval.synth_csv, "synthetic CSV")->required();
    eval_cmd->add_option("--overrides", eval.overrides_path,
                         "schema override TSV");
    eval_cmd->add_option("--target", eval.target,
                         "target column for ML efficacy");
    eval_cmd->add_option("--out", eval.out_json, "report JSON path");
    eval_cmd->add_option("--seed", eval.protocol.seed);
    eval_cmd->add_option("--tree-depth", eval.protocol.tree_depth);
    eval_cmd->add_option("--poly-degree", eval.protocol.poly_degree);
    eval_cmd->add_option("--folds", eval.protocol.folds);

    rcc::MonitorReportArgs mon;
    auto* mon_cmd = app.add_subcommand(
        "monitor-report", "detect instability onsets in a monitor series");
    mon_cmd->add_option("--series", mon.series_csv, "monitor.csv from fit")
        ->required();
    mon_cmd->add_option("--out", mon.out_json, "report JSON path");
    mon_cmd->add_option("--window", mon.window, "rolling window length");
    mon_cmd->add_option("--spike-factor", mon.spike_factor,
                        "z-score threshold for an onset");

    CLI11_PARSE(app, argc, argv);

    if (fit_cmd->parsed()) return rcc::cmd_fit(fit);
    if (sample_cmd->parsed()) return rcc::cmd_sample(sample);
    if (eval_cmd->parsed()) return rcc::cmd_evaluate(eval);
    return rcc::cmd_monitor_report(mon);
}
