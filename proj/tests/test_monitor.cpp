#include <algorithm>
#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "rcc/monitor.hpp"
#include "rcc/rng.hpp"

using namespace rcc;

namespace {

// Independent oracle: cyclic Jacobi eigenvalue iteration on M^T M. Singular
// values are the square roots of its eigenvalues.
std::vector<double> jacobi_singular_values(const std::vector<double>& m,
                                           size_t rows, size_t cols) {
    std::vector<double> a(cols * cols, 0.0);
    for (size_t i = 0; i < cols; ++i)
        for (size_t j = 0; j < cols; ++j) {
            double s = 0.0;
            for (size_t r = 0; r < rows; ++r)
                s += m[r * cols + i] * m[r * cols + j];
            a[i * cols + j] = s;
        }
    for (int sweep = 0; sweep < 60; ++sweep) {
        double off = 0.0;
        for (size_t p = 0; p < cols; ++p)
            for (size_t q = p + 1; q < cols; ++q) off += std::fabs(a[p * cols + q]);
        if (off < 1e-14) break;
        for (size_t p = 0; p < cols; ++p) {
            for (size_t q = p + 1; q < cols; ++q) {
                const double apq = a[p * cols + q];
                if (std::fabs(apq) < 1e-18) continue;
                const double theta =
                    0.5 * std::atan2(2.0 * apq,
                                     a[q * cols + q] - a[p * cols + p]);
                const double c = std::cos(theta), s = std::sin(theta);
                for (size_t k = 0; k < cols; ++k) {
                    const double akp = a[k * cols + p], akq = a[k * cols + q];
                    a[k * cols + p] = c * akp - s * akq;
                    a[k * cols + q] = s * akp + c * akq;
                }
                for (size_t k = 0; k < cols; ++k) {
                    const double apk = a[p * cols + k], aqk = a[q * cols + k];
                    a[p * cols + k] = c * apk - s * aqk;
                    a[q * cols + k] = s * apk + c * aqk;
                }
            }
        }
    }
    std::vector<double> sv;
    for (size_t i = 0; i < cols; ++i)
        sv.push_back(std::sqrt(std::max(0.0, a[i * cols + i])));
    std::sort(sv.begin(), sv.end(), std::greater<double>());
    const size_t rank_cap = std::min(rows, cols);
    sv.resize(rank_cap);
    return sv;
}

}  // namespace

TEST_CASE("singular values of a diagonal matrix are its absolute entries") {
    const std::vector<double> m = {3.0, 0.0, 0.0, 0.0, -5.0, 0.0, 0.0, 0.0, 2.0};
    const auto sv = svd_spectrum(m, 3, 3);
    REQUIRE(sv.size() == 3);
    CHECK(sv[0] == doctest::Approx(5.0));
    CHECK(sv[1] == doctest::Approx(3.0));
    CHECK(sv[2] == doctest::Approx(2.0));
}

TEST_CASE("spectrum matches an independent Jacobi eigen-iteration") {
    Rng rng(61);
    using Dims = std::pair<size_t, size_t>;
    for (const auto [r, c] : {Dims{6, 4}, Dims{4, 6}, Dims{5, 5}}) {
        std::vector<double> m(r * c);
        for (auto& v : m) v = rng.uniform(-2.0, 2.0);
        const auto sv = svd_spectrum(m, r, c);
        const auto oracle = jacobi_singular_values(m, r, c);
        REQUIRE(sv.size() == oracle.size());
        for (size_t i = 0; i < sv.size(); ++i)
            CHECK(sv[i] == doctest::Approx(oracle[i]).epsilon(1e-8));
    }
}

TEST_CASE("spectrum validation") {
    CHECK_THROWS(svd_spectrum({1.0, 2.0}, 2, 2));  // size mismatch
    CHECK_THROWS(svd_spectrum({1.0, std::nan("")}, 1, 2));
}

TEST_CASE("stability metric: flat unit spectrum of length 20 gives 2.5") {
    const std::vector<double> flat(20, 1.0);
    // anchor 1 + three ratio terms of 1/2 each
    CHECK(stability_metric(flat, 0.1, 0.0) == doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("stability metric: indices beyond the spectrum read as zero") {
    // m_r = 1 so the ratio sum reaches past the end
    CHECK(stability_metric({2.0}, 0.1, 0.0) ==
          doctest::Approx(2.0 + 2.0 / 1.0 + 0.0));
    // additive bias is passed through
    CHECK(stability_metric({2.0}, 0.1, 1.5) ==
          doctest::Approx(2.0 + 2.0 + 1.5));
    CHECK_THROWS(stability_metric({}, 0.1, 0.0));
}

TEST_CASE("stability metric is invariant under orthogonal mixing") {
    Rng rng(67);
    std::vector<double> m(16);
    for (auto& v : m) v = rng.uniform(-1.0, 1.0);
    // Givens rotation applied from the left preserves singular values
    const double th = 0.73, c = std::cos(th), s = std::sin(th);
    std::vector<double> rotated(m);
    for (size_t k = 0; k < 4; ++k) {
        rotated[0 * 4 + k] = c * m[0 * 4 + k] - s * m[2 * 4 + k];
        rotated[2 * 4 + k] = s * m[0 * 4 + k] + c * m[2 * 4 + k];
    }
    const double r1 = stability_metric(svd_spectrum(m, 4, 4), 0.1, 0.0);
    const double r2 = stability_metric(svd_spectrum(rotated, 4, 4), 0.1, 0.0);
    CHECK(std::fabs(r1 - r2) < 1e-9);
}

TEST_CASE("onset detection flags the first spike past the rolling band") {
    std::vector<double> series(30, 1.0);
    Rng rng(71);
    for (auto& v : series) v += rng.uniform(-0.01, 0.01);
    series.push_back(25.0);  // index 30
    series.push_back(1.0);
    const auto onset = detect_onset(series, 20, 3.0);
    REQUIRE(onset.has_value());
    CHECK(*onset == 30);
    CHECK_FALSE(detect_onset(std::vector<double>(40, 2.0), 20, 3.0).has_value());
    CHECK_THROWS(detect_onset({1.0, 2.0}, 20, 3.0));
    CHECK_THROWS(detect_onset(series, 1, 3.0));
}

TEST_CASE("monitor series export/load round-trip with aggregate rows") {
    std::vector<SvdSnapshot> snaps;
    for (long it : {10L, 20L}) {
        for (const char* layer : {"conv1.W", "conv2.W"}) {
            SvdSnapshot s;
            s.iteration = it;
            s.layer = layer;
            s.singular_values = {1.0, 0.5};
            s.metric = 2.0 + 0.001 * static_cast<double>(it);
            s.trace_surrogate = 1.5;
            s.vartheta = 1.75;
            s.projected = it == 20;
            snaps.push_back(std::move(s));
        }
    }
    const auto path =
        (std::filesystem::temp_directory_path() / "monitor_rt.csv").string();
    export_series(snaps, path);
    const auto series = load_series(path);
    // 4 layer rows + 2 aggregate rows
    REQUIRE(series.size() == 6);
    size_t aggregates = 0;
    for (const auto& p : series)
        if (p.layer == "aggregate") {
            ++aggregates;
            CHECK(p.metric ==
                  doctest::Approx(2.0 + 0.001 * static_cast<double>(p.iteration)));
        }
    CHECK(aggregates == 2);
    const auto onsets = detect_onsets_by_layer(series, 20, 3.0);
    CHECK(onsets.size() == 3);  // two layers + aggregate
}
