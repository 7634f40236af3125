#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "rcc/artifacts.hpp"
#include "rcc/rng.hpp"

using namespace rcc;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string toy_csv() {
    const auto path = fs::temp_directory_path() / "artifacts_toy.csv";
    std::ofstream out(path);
    Rng rng(404);
    out << "amount,grade,active\n";
    for (int i = 0; i < 200; ++i) {
        const double x = i % 2 ? rng.normal(0.0, 1.0) : rng.normal(5.0, 1.0);
        out << x << ',' << "abc"[rng.uniform_int(3)] << ','
            << (rng.uniform() < 0.5 ? "yes" : "no") << '\n';
    }
    return path.string();
}

FitArgs small_fit(const std::string& data, const std::string& out_dir) {
    FitArgs args;
    args.config.data_csv = data;
    args.out_dir = out_dir;
    args.config.train.iterations = 25;
    args.config.train.batch_size = 16;
    args.config.train.monitor_every = 5;
    args.config.train.seed = 11;
    args.config.train.gen.filters = 4;
    args.config.train.gen.channel_len = 8;
    args.config.train.gen.d_z = 8;
    args.config.train.gen.bin_len = 4;
    args.config.train.gen.varpi = 4;
    args.config.train.disc.filters1 = 8;
    args.config.train.disc.filters2 = 8;
    args.config.train.disc.filters3 = 12;
    return args;
}

}  // namespace

TEST_CASE("run config serializes losslessly and hashes stably") {
    RunConfig cfg;
    cfg.data_csv = "data.csv";
    cfg.train.seed = 99;
    cfg.train.gen.filters = 24;
    const std::string j = run_config_to_json(cfg);
    const RunConfig back = run_config_from_json(j);
    CHECK(run_config_to_json(back) == j);
    CHECK(run_id(cfg) == run_id(back));
    RunConfig other = cfg;
    other.train.seed = 100;
    CHECK(run_id(cfg) != run_id(other));
}

TEST_CASE("fit -> sample -> evaluate -> monitor-report pipeline") {
    const std::string data = toy_csv();
    const auto dir1 = fs::temp_directory_path() / "rcc_run1";
    const auto dir2 = fs::temp_directory_path() / "rcc_run2";
    fs::remove_all(dir1);
    fs::remove_all(dir2);

    REQUIRE(cmd_fit(small_fit(data, dir1.string())) == 0);
    for (const char* f : {"config.json", "encoders.json", "generator.json",
                          "critic0.json", "monitor.csv", "losses.csv",
                          "manifest.json", "schema.tsv", "holdout_split.csv"})
        CHECK(fs::exists(dir1 / f));

    // a rerun from the persisted config reproduces every artifact byte
    FitArgs rerun;
    rerun.config_path = (dir1 / "config.json").string();
    rerun.out_dir = dir2.string();
    REQUIRE(cmd_fit(rerun) == 0);
    for (const char* f : {"config.json", "encoders.json", "generator.json",
                          "critic0.json", "monitor.csv", "losses.csv"})
        CHECK(slurp(dir1 / f) == slurp(dir2 / f));

    const auto synth_csv = fs::temp_directory_path() / "artifacts_synth.csv";
    SampleArgs sample{dir1.string(), synth_csv.string(), 50, 3};
    REQUIRE(cmd_sample(sample) == 0);
    const Table synth = load_csv(synth_csv.string());
    CHECK(synth.row_count() == 50);
    CHECK(synth.column_count() == 3);

    EvaluateArgs eval;
    eval.real_csv = data;
    eval.synth_csv = synth_csv.string();
    eval.target = "active";
    eval.out_json = (fs::temp_directory_path() / "artifacts_eval.json").string();
    REQUIRE(cmd_evaluate(eval) == 0);
    const std::string report = slurp(eval.out_json);
    CHECK(report.find("\"nndr\"") != std::string::npos);
    CHECK(report.find("\"efficacy\"") != std::string::npos);

    MonitorReportArgs mon;
    mon.series_csv = (dir1 / "monitor.csv").string();
    mon.out_json = (fs::temp_directory_path() / "artifacts_mon.json").string();
    mon.window = 2;
    REQUIRE(cmd_monitor_report(mon) == 0);
    CHECK(slurp(mon.out_json).find("\"layers\"") != std::string::npos);
}

TEST_CASE("commands return categorized nonzero codes on bad input") {
    FitArgs missing_data;
    missing_data.out_dir = (fs::temp_directory_path() / "rcc_bad").string();
    CHECK(cmd_fit(missing_data) == 2);  // no data file configured

    SampleArgs zero_rows{"/nonexistent", "/tmp/x.csv", 0, 1};
    CHECK(cmd_sample(zero_rows) == 2);

    SampleArgs no_model{"/nonexistent", "/tmp/x.csv", 5, 1};
    CHECK(cmd_sample(no_model) != 0);

    MonitorReportArgs mon;
    mon.series_csv = "/nonexistent.csv";
    CHECK(cmd_monitor_report(mon) != 0);
}
