#pragma once

#include <cstdint>
#include <string>

#include "rcc/evalmetrics.hpp"
#include "rcc/train.hpp"
#include "rcc/transform.hpp"

namespace rcc {

// Fully resolved run configuration; every field is persisted so a rerun from
// the saved config reproduces the artifacts byte for byte.
struct RunConfig {
    std::string data_csv;
    std::string overrides_path;  // optional schema override file
    double holdout_ratio = 0.3;
    FitOptions fit;
    TrainConfig train;
};

std::string run_config_to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const std::string& text);

// Stable hex id derived from the serialized config.
std::string run_id(const RunConfig& cfg);

struct FitArgs {
    RunConfig config;
    std::string config_path;  // when set, loaded before flag overrides
    std::string out_dir;
};

struct SampleArgs {
    std::string model_dir;
    std::string out_csv;
    size_t rows = 0;
    uint64_t seed = 0;
};

struct EvaluateArgs {
    std::string real_csv;
    std::string synth_csv;
    std::string overrides_path;
    std::string target;  // optional; enables the ML efficacy section
    std::string out_json;
    EfficacyProtocol protocol;
};

struct MonitorReportArgs {
    std::string series_csv;
    std::string out_json;  // optional; text report goes to stdout
    int window = 20;
    double spike_factor = 3.0;
};

// Each returns a process exit code: 0 success, 2 invalid input or
// configuration, 3 runtime failure. Errors are printed to stderr.
int cmd_fit(const FitArgs& args);
int cmd_sample(const SampleArgs& args);
int cmd_evaluate(const EvaluateArgs& args);
int cmd_monitor_report(const MonitorReportArgs& args);

}  // namespace rcc
