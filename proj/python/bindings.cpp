#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <stdexcept>

#include "rcc/artifacts.hpp"
#include "rcc/cond.hpp"
#include "rcc/evalmetrics.hpp"
#include "rcc/monitor.hpp"
#include "rcc/rng.hpp"
#include "rcc/train.hpp"

namespace py = pybind11;

PYBIND11_MODULE(_core, m) {
    m.doc() = "Tabular data synthesis: conditional adversarial generation "
              "with spectral stability monitoring";

    m.def("derive_seed", &rcc::derive_seed, py::arg("master"), py::arg("tag"));
    m.def("sample_cantor", &rcc::sample_cantor, py::arg("n"),
          py::arg("depth") = rcc::kDefaultCantorDepth, py::arg("seed") = 0);
    m.def("mgf_cantor", &rcc::mgf_cantor, py::arg("t"), py::arg("k_max"));

    m.def("svd_spectrum", &rcc::svd_spectrum, py::arg("matrix"),
          py::arg("rows"), py::arg("cols"));
    m.def("stability_metric", &rcc::stability_metric, py::arg("spectrum"),
          py::arg("c_s") = 0.1, py::arg("b_0") = 0.0);
    m.def(
        "detect_onset",
        [](const std::vector<double>& series, int window, double spike_factor) {
            const auto r = rcc::detect_onset(series, window, spike_factor);
            return r ? py::cast(*r) : py::object(py::none());
        },
        py::arg("series"), py::arg("window") = 20, py::arg("spike_factor") = 3.0);

    m.def("nndr", &rcc::nndr, py::arg("synth"), py::arg("real"));
    m.def("ims", &rcc::ims, py::arg("synth"), py::arg("real"),
          py::arg("tol") = 1e-12);
    m.def(
        "dcr",
        [](const rcc::Matrix& synth, const rcc::Matrix& real) {
            const auto r = rcc::dcr(synth, real);
            return py::make_tuple(r.value, r.degenerate);
        },
        py::arg("synth"), py::arg("real"));
    m.def("ks_statistic", &rcc::ks_statistic, py::arg("a"), py::arg("b"));
    m.def("tv_distance", &rcc::tv_distance, py::arg("a"), py::arg("b"),
          py::arg("n_categories"));

    m.def(
        "fit_csv",
        [](const std::string& data_csv, const std::string& out_dir,
           long iterations, size_t batch_size, uint64_t seed, size_t filters,
           bool regularize, double holdout_ratio) {
            rcc::FitArgs args;
            args.config.data_csv = data_csv;
            args.out_dir = out_dir;
            args.config.holdout_ratio = holdout_ratio;
            args.config.train.iterations = iterations;
            args.config.train.batch_size = batch_size;
            args.config.train.seed = seed;
            args.config.train.gen.filters = filters;
            args.config.train.regularize = regularize;
            if (rcc::cmd_fit(args) != 0)
                throw std::runtime_error("fit failed; see stderr");
        },
        py::arg("data_csv"), py::arg("out_dir"), py::arg("iterations") = 2000,
        py::arg("batch_size") = 64, py::arg("seed") = 0,
        py::arg("filters") = 16, py::arg("regularize") = true,
        py::arg("holdout_ratio") = 0.3);

    m.def(
        "sample_csv",
        [](const std::string& model_dir, const std::string& out_csv,
           size_t rows, uint64_t seed) {
            rcc::SampleArgs args{model_dir, out_csv, rows, seed};
            if (rcc::cmd_sample(args) != 0)
                throw std::runtime_error("sample failed; see stderr");
        },
        py::arg("model_dir"), py::arg("out_csv"), py::arg("rows"),
        py::arg("seed") = 0);

    m.def(
        "evaluate_csv",
        [](const std::string& real_csv, const std::string& synth_csv,
           const std::string& target, const std::string& out_json) {
            rcc::EvaluateArgs args;
            args.real_csv = real_csv;
            args.synth_csv = synth_csv;
            args.target = target;
            args.out_json = out_json;
            if (rcc::cmd_evaluate(args) != 0)
                throw std::runtime_error("evaluate failed; see stderr");
        },
        py::arg("real_csv"), py::arg("synth_csv"), py::arg("target") = "",
        py::arg("out_json") = "");
}
