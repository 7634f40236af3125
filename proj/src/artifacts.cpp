#include "rcc/artifacts.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "json.hpp"
#include "rcc/monitor.hpp"

namespace rcc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json adam_to_json(const ad::AdamConfig& a) {
    return {{"lr", a.lr}, {"beta1", a.beta1}, {"beta2", a.beta2}, {"eps", a.eps}};
}

ad::AdamConfig adam_from_json(const json& j) {
    ad::AdamConfig a;
    a.lr = j.at("lr").get<double>();
    a.beta1 = j.at("beta1").get<double>();
    a.beta2 = j.at("beta2").get<double>();
    a.eps = j.at("eps").get<double>();
    return a;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

std::string run_config_to_json(const RunConfig& cfg) {
    json j;
    j["format"] = "rccsyn.config";
    j["version"] = 1;
    j["data_csv"] = cfg.data_csv;
    j["overrides_path"] = cfg.overrides_path;
    j["holdout_ratio"] = cfg.holdout_ratio;
    j["fit"] = {{"mode_budget", cfg.fit.mode_budget},
                {"max_iter", cfg.fit.max_iter},
                {"tol", cfg.fit.tol},
                {"epsilon", cfg.fit.epsilon},
                {"max_retries", cfg.fit.max_retries},
                {"clip_width", cfg.fit.clip_width}};
    const TrainConfig& t = cfg.train;
    j["train"] = {{"iterations", t.iterations},
                  {"batch_size", t.batch_size},
                  {"d_steps", t.d_steps},
                  {"disc_count", t.disc_count},
                  {"monitor_every", t.monitor_every},
                  {"regularize", t.regularize},
                  {"weight_clip", t.weight_clip},
                  {"cantor_depth", t.cantor_depth},
                  {"seed", t.seed},
                  {"adam_g", adam_to_json(t.adam_g)},
                  {"adam_d", adam_to_json(t.adam_d)},
                  {"gen",
                   {{"d_z", t.gen.d_z},
                    {"bin_len", t.gen.bin_len},
                    {"varpi", t.gen.varpi},
                    {"filters", t.gen.filters},
                    {"channel_len", t.gen.channel_len},
                    {"gumbel_tau", t.gen.gumbel_tau},
                    {"bn_momentum", t.gen.bn_momentum},
                    {"bn_eps", t.gen.bn_eps},
                    {"ablate_middle_residual", t.gen.ablate_middle_residual},
                    {"disable_skip_lr", t.gen.disable_skip_lr},
                    {"disable_skip_rr", t.gen.disable_skip_rr}}},
                  {"disc",
                   {{"filters1", t.disc.filters1},
                    {"filters2", t.disc.filters2},
                    {"filters3", t.disc.filters3},
                    {"kernel", t.disc.kernel},
                    {"bn_momentum", t.disc.bn_momentum},
                    {"bn_eps", t.disc.bn_eps}}}};
    return j.dump(2) + "\n";
}

RunConfig run_config_from_json(const std::string& text) {
    const json j = json::parse(text);
    if (j.at("format") != "rccsyn.config" || j.at("version") != 1)
        throw std::invalid_argument("run config: unsupported format/version");
    RunConfig cfg;
    cfg.data_csv = j.at("data_csv").get<std::string>();
    cfg.overrides_path = j.at("overrides_path").get<std::string>();
    cfg.holdout_ratio = j.at("holdout_ratio").get<double>();
    const json& f = j.at("fit");
    cfg.fit.mode_budget = f.at("mode_budget").get<int>();
    cfg.fit.max_iter = f.at("max_iter").get<int>();
    cfg.fit.tol = f.at("tol").get<double>();
    cfg.fit.epsilon = f.at("epsilon").get<double>();
    cfg.fit.max_retries = f.at("max_retries").get<int>();
    cfg.fit.clip_width = f.at("clip_width").get<double>();
    const json& t = j.at("train");
    cfg.train.iterations = t.at("iterations").get<long>();
    cfg.train.batch_size = t.at("batch_size").get<size_t>();
    cfg.train.d_steps = t.at("d_steps").get<int>();
    cfg.train.disc_count = t.at("disc_count").get<size_t>();
    cfg.train.monitor_every = t.at("monitor_every").get<int>();
    cfg.train.regularize = t.at("regularize").get<bool>();
    cfg.train.weight_clip = t.at("weight_clip").get<double>();
    cfg.train.cantor_depth = t.at("cantor_depth").get<int>();
    cfg.train.seed = t.at("seed").get<uint64_t>();
    cfg.train.adam_g = adam_from_json(t.at("adam_g"));
    cfg.train.adam_d = adam_from_json(t.at("adam_d"));
    const json& g = t.at("gen");
    cfg.train.gen.d_z = g.at("d_z").get<size_t>();
    cfg.train.gen.bin_len = g.at("bin_len").get<size_t>();
    cfg.train.gen.varpi = g.at("varpi").get<size_t>();
    cfg.train.gen.filters = g.at("filters").get<size_t>();
    cfg.train.gen.channel_len = g.at("channel_len").get<size_t>();
    cfg.train.gen.gumbel_tau = g.at("gumbel_tau").get<double>();
    cfg.train.gen.bn_momentum = g.at("bn_momentum").get<double>();
    cfg.train.gen.bn_eps = g.at("bn_eps").get<double>();
    cfg.train.gen.ablate_middle_residual =
        g.at("ablate_middle_residual").get<bool>();
    cfg.train.gen.disable_skip_lr = g.at("disable_skip_lr").get<bool>();
    cfg.train.gen.disable_skip_rr = g.at("disable_skip_rr").get<bool>();
    const json& d = t.at("disc");
    cfg.train.disc.filters1 = d.at("filters1").get<size_t>();
    cfg.train.disc.filters2 = d.at("filters2").get<size_t>();
    cfg.train.disc.filters3 = d.at("filters3").get<size_t>();
    cfg.train.disc.kernel = d.at("kernel").get<size_t>();
    cfg.train.disc.bn_momentum = d.at("bn_momentum").get<double>();
    cfg.train.disc.bn_eps = d.at("bn_eps").get<double>();
    return cfg;
}

std::string run_id(const RunConfig& cfg) {
    // FNV-1a over the canonical serialization
    uint64_t h = 1469598103934665603ULL;
    for (const char c : run_config_to_json(cfg)) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(h));
    return buf;
}

namespace {

int guarded(const std::function<void()>& fn) {
    try {
        fn();
        return 0;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error (invalid input): " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error (runtime): " << e.what() << "\n";
        return 3;
    }
}

void write_losses_csv(const std::string& path, const std::vector<double>& d,
                      const std::vector<double>& g) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "iteration,critic_loss,generator_loss\n";
    for (size_t i = 0; i < d.size(); ++i)
        out << i + 1 << ',' << format_double(d[i]) << ',' << format_double(g[i])
            << '\n';
}

}  // namespace

int cmd_fit(const FitArgs& args) {
    return guarded([&] {
        RunConfig cfg = args.config;
        if (!args.config_path.empty())
            cfg = run_config_from_json(read_file(args.config_path));
        if (cfg.data_csv.empty())
            throw std::invalid_argument("fit: no input data file given");
        if (cfg.holdout_ratio <= 0.0 || cfg.holdout_ratio >= 1.0)
            throw std::invalid_argument("fit: holdout ratio must be in (0,1)");
        fs::create_directories(args.out_dir);

        SchemaOverrides overrides;
        if (!cfg.overrides_path.empty())
            overrides = load_schema_overrides(cfg.overrides_path);
        Table table = load_csv(cfg.data_csv, std::nullopt, overrides);
        table = impute_nulls(table, cfg.train.seed);
        const auto [train_split, holdout_split] =
            split_train_holdout(table, 1.0 - cfg.holdout_ratio, cfg.train.seed);

        const RowEncoder encoder =
            fit_encoders(train_split, cfg.fit, cfg.train.seed);
        const auto encoded = encode_table(train_split, encoder);

        ad::Tape tape;
        TrainResult result = train(tape, encoded, encoder.schema,
                                   encoder.segments, encoder.total_width,
                                   cfg.train);

        const fs::path dir(args.out_dir);
        write_file((dir / "config.json").string(), run_config_to_json(cfg));
        write_file((dir / "encoders.json").string(),
                   row_encoder_to_json(encoder) + "\n");
        write_file((dir / "generator.json").string(),
                   result.generator.state_to_json() + "\n");
        std::vector<std::string> files = {"config.json", "encoders.json",
                                          "generator.json"};
        for (size_t i = 0; i < result.critics.size(); ++i) {
            const std::string name = "critic" + std::to_string(i) + ".json";
            write_file((dir / name).string(),
                       result.critics[i].state_to_json() + "\n");
            files.push_back(name);
        }
        export_series(result.monitor, (dir / "monitor.csv").string());
        write_losses_csv((dir / "losses.csv").string(), result.d_loss_trace,
                         result.g_loss_trace);
        save_schema_overrides(encoder.schema, (dir / "schema.tsv").string());
        write_csv(train_split, (dir / "train_split.csv").string());
        write_csv(holdout_split, (dir / "holdout_split.csv").string());
        files.insert(files.end(), {"monitor.csv", "losses.csv", "schema.tsv",
                                   "train_split.csv", "holdout_split.csv"});

        json manifest;
        manifest["format"] = "rccsyn.run";
        manifest["version"] = 1;
        manifest["run_id"] = run_id(cfg);
        manifest["files"] = files;
        write_file((dir / "manifest.json").string(), manifest.dump(2) + "\n");
        std::cout << "fit complete: run " << run_id(cfg) << " in "
                  << args.out_dir << "\n";
    });
}

int cmd_sample(const SampleArgs& args) {
    return guarded([&] {
        if (args.rows == 0)
            throw std::invalid_argument("sample: row count must be positive");
        const fs::path dir(args.model_dir);
        const RunConfig cfg =
            run_config_from_json(read_file((dir / "config.json").string()));
        const RowEncoder encoder =
            row_encoder_from_json(read_file((dir / "encoders.json").string()));
        ad::Tape tape;
        Generator gen = Generator::state_from_json(
            tape, read_file((dir / "generator.json").string()));
        const auto encoded =
            synthesize_encoded(tape, gen, encoder.schema, args.rows,
                               cfg.train.cantor_depth, args.seed,
                               cfg.train.batch_size);
        const Table synth = decode_table(encoded, encoder);
        write_csv(synth, args.out_csv);
        std::cout << "wrote " << args.rows << " rows to " << args.out_csv
                  << "\n";
    });
}

int cmd_evaluate(const EvaluateArgs& args) {
    return guarded([&] {
        SchemaOverrides overrides;
        if (!args.overrides_path.empty())
            overrides = load_schema_overrides(args.overrides_path);
        const Table real = load_csv(args.real_csv, std::nullopt, overrides);
        const Table synth = load_csv(args.synth_csv, real.schema);

        json report;
        report["format"] = "rccsyn.evaluation";
        report["version"] = 1;
        json marginals = json::array();
        for (const auto& m : marginal_distances(real, synth))
            marginals.push_back({{"column", m.name},
                                 {"kind", to_string(m.kind)},
                                 {"statistic",
                                  m.kind == ColumnKind::Continuous ? "ks" : "tv"},
                                 {"value", m.value}});
        report["marginals"] = std::move(marginals);

        const Matrix ms = mixed_embedding(synth, real);
        const Matrix mr = mixed_embedding(real, real);
        const DcrResult d = dcr(ms, mr);
        report["privacy"] = {{"nndr", nndr(ms, mr)},
                             {"ims", ims_table(synth, real)},
                             {"dcr", d.value},
                             {"dcr_degenerate", d.degenerate}};

        if (!args.target.empty()) {
            const auto synth_on_real =
                ml_efficacy_cross(synth, real, args.target, args.protocol);
            const auto real_baseline =
                ml_efficacy(real, args.target, args.protocol);
            auto to_json = [](const EfficacyReport& r) {
                json j = {{"target", r.target},
                          {"classification", r.classification},
                          {"holdout_score", r.holdout_score},
                          {"fold_scores", r.fold_scores},
                          {"cv_mean", r.cv_mean}};
                if (!r.classification)
                    j["regression"] = {{"r2", r.regress.r2},
                                       {"mse", r.regress.mse},
                                       {"mae", r.regress.mae}};
                return j;
            };
            report["efficacy"] = {{"train_synth_test_real", to_json(synth_on_real)},
                                  {"real_baseline", to_json(real_baseline)}};
        }

        const std::string text = report.dump(2) + "\n";
        if (args.out_json.empty())
            std::cout << text;
        else
            write_file(args.out_json, text);
    });
}

int cmd_monitor_report(const MonitorReportArgs& args) {
    return guarded([&] {
        const auto series = load_series(args.series_csv);
        const auto onsets =
            detect_onsets_by_layer(series, args.window, args.spike_factor);
        json report;
        report["format"] = "rccsyn.monitor_report";
        report["version"] = 1;
        json layers = json::array();
        for (const auto& o : onsets) {
            json j = {{"layer", o.layer}};
            if (o.onset_iteration)
                j["onset_iteration"] = *o.onset_iteration;
            else
                j["onset_iteration"] = nullptr;
            layers.push_back(std::move(j));
            std::cout << o.layer << ": "
                      << (o.onset_iteration
                              ? "instability onset at iteration " +
                                    std::to_string(*o.onset_iteration)
                              : std::string("stable"))
                      << "\n";
        }
        report["layers"] = std::move(layers);
        if (!args.out_json.empty()) write_file(args.out_json, report.dump(2) + "\n");
    });
}

}  // namespace rcc
