#pragma once

#include <optional>
#include <string>
#include <vector>

namespace rcc {

// Singular values of a row-major (rows x cols) matrix, descending.
std::vector<double> svd_spectrum(const std::vector<double>& matrix, size_t rows,
                                 size_t cols);

struct MonitorConfig {
    double c_s = 0.1;        // fraction of the spectrum feeding the ratio sum
    double b_0 = 0.0;        // additive bias
    int window = 20;         // rolling window for onset detection
    double spike_factor = 3.0;
};

// Anchor singular value plus the ratio sum over the top c_s*m_r values plus
// b_0. Indices past the end of the spectrum read as zero.
double stability_metric(const std::vector<double>& spectrum, double c_s,
                        double b_0);

struct SvdSnapshot {
    long iteration = 0;
    std::string layer;
    std::vector<double> singular_values;
    double metric = 0.0;
    double trace_surrogate = 0.0;  // sum of singular values
    double vartheta = 0.0;
    bool projected = false;
};

// First index t with series[t] > mean + spike_factor * std of the preceding
// `window` points; nullopt when the series stays inside the band.
std::optional<size_t> detect_onset(const std::vector<double>& series, int window,
                                   double spike_factor);

// CSV of (iteration, layer, rho, sum_lambda, vartheta, projected) plus one
// aggregate row (mean rho over layers) per iteration.
void export_series(const std::vector<SvdSnapshot>& snapshots,
                   const std::string& path);

struct SeriesPoint {
    long iteration;
    std::string layer;
    double metric;
};

std::vector<SeriesPoint> load_series(const std::string& path);

struct OnsetReport {
    std::string layer;
    std::optional<long> onset_iteration;
};

// Per-layer onsets (plus "aggregate") from a loaded monitor series.
std::vector<OnsetReport> detect_onsets_by_layer(
    const std::vector<SeriesPoint>& series, int window, double spike_factor);

}  // namespace rcc
