#include "rcc/monitor.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace rcc {

std::vector<double> svd_spectrum(const std::vector<double>& matrix, size_t rows,
                                 size_t cols) {
    if (rows == 0 || cols == 0 || matrix.size() != rows * cols)
        throw std::invalid_argument("svd_spectrum: bad matrix dimensions");
    for (const double v : matrix)
        if (!std::isfinite(v))
            throw std::invalid_argument("svd_spectrum: non-finite entry");
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                   Eigen::RowMajor>>
        m(matrix.data(), static_cast<long>(rows), static_cast<long>(cols));
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& sv = svd.singularValues();
    std::vector<double> out(sv.data(), sv.data() + sv.size());
    std::sort(out.begin(), out.end(), std::greater<double>());
    return out;
}

double stability_metric(const std::vector<double>& spectrum, double c_s,
                        double b_0) {
    if (spectrum.empty())
        throw std::invalid_argument("stability_metric: empty spectrum");
    const size_t m_r = spectrum.size();
    const size_t m_hat = std::max<size_t>(
        1, static_cast<size_t>(std::llround(c_s * static_cast<double>(m_r))));
    auto at = [&](size_t i) { return i < m_r ? spectrum[i] : 0.0; };
    double metric = spectrum[0];  // anchor
    for (size_t i = 0; i <= m_hat; ++i) metric += at(i) / (at(i + 1) + 1.0);
    return metric + b_0;
}

std::optional<size_t> detect_onset(const std::vector<double>& series, int window,
                                   double spike_factor) {
    if (window < 2) throw std::invalid_argument("detect_onset: window must be >= 2");
    if (series.size() < static_cast<size_t>(window) + 1)
        throw std::invalid_argument("detect_onset: series shorter than window + 1");
    const size_t w = static_cast<size_t>(window);
    for (size_t t = w; t < series.size(); ++t) {
        double mean = 0.0;
        for (size_t i = t - w; i < t; ++i) mean += series[i];
        mean /= static_cast<double>(w);
        double var = 0.0;
        for (size_t i = t - w; i < t; ++i)
            var += (series[i] - mean) * (series[i] - mean);
        var /= static_cast<double>(w);
        if (series[t] > mean + spike_factor * std::sqrt(var)) return t;
    }
    return std::nullopt;
}

namespace {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void export_series(const std::vector<SvdSnapshot>& snapshots,
                   const std::string& path) {
    if (snapshots.empty())
        throw std::invalid_argument("export_series: no snapshots");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("export_series: cannot write " + path);
    out << "iteration,layer,rho,sum_lambda,vartheta,projected\n";
    std::map<long, std::pair<double, size_t>> aggregate;
    for (const auto& s : snapshots) {
        out << s.iteration << ',' << s.layer << ',' << format_double(s.metric)
            << ',' << format_double(s.trace_surrogate) << ','
            << format_double(s.vartheta) << ',' << (s.projected ? 1 : 0) << '\n';
        auto& [sum, count] = aggregate[s.iteration];
        sum += s.metric;
        ++count;
    }
    for (const auto& [iter, agg] : aggregate)
        out << iter << ",aggregate,"
            << format_double(agg.first / static_cast<double>(agg.second))
            << ",0,0,0\n";
}

std::vector<SeriesPoint> load_series(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_series: cannot open " + path);
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("load_series: empty file " + path);
    std::vector<SeriesPoint> out;
    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string iter_s, layer, rho_s;
        if (!std::getline(ss, iter_s, ',') || !std::getline(ss, layer, ',') ||
            !std::getline(ss, rho_s, ','))
            throw std::runtime_error("load_series: malformed line " +
                                     std::to_string(lineno) + " in " + path);
        try {
            out.push_back({std::stol(iter_s), layer, std::stod(rho_s)});
        } catch (const std::exception&) {
            throw std::runtime_error("load_series: malformed line " +
                                     std::to_string(lineno) + " in " + path);
        }
    }
    return out;
}

std::vector<OnsetReport> detect_onsets_by_layer(
    const std::vector<SeriesPoint>& series, int window, double spike_factor) {
    std::map<std::string, std::vector<std::pair<long, double>>> by_layer;
    for (const auto& p : series) by_layer[p.layer].push_back({p.iteration, p.metric});
    std::vector<OnsetReport> reports;
    for (auto& [layer, points] : by_layer) {
        std::sort(points.begin(), points.end());
        std::vector<double> values;
        values.reserve(points.size());
        for (const auto& [it, v] : points) values.push_back(v);
        OnsetReport r{layer, std::nullopt};
        if (values.size() >= static_cast<size_t>(window) + 1) {
            if (const auto idx = detect_onset(values, window, spike_factor))
                r.onset_iteration = points[*idx].first;
        }
        reports.push_back(std::move(r));
    }
    return reports;
}

}  // namespace rcc
