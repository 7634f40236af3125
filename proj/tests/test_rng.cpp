#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "doctest.h"
#include "rcc/rng.hpp"

using rcc::Rng;

TEST_CASE("same seed reproduces the stream exactly") {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
    Rng c(42), d(43);
    bool all_equal = true;
    for (int i = 0; i < 10; ++i)
        all_equal = all_equal && c.next_u64() == d.next_u64();
    CHECK_FALSE(all_equal);
}

TEST_CASE("uniform stays in [0,1) with roughly uniform mass") {
    Rng rng(7);
    const int n = 100000;
    double sum = 0.0;
    int low_half = 0;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
        low_half += u < 0.5;
    }
    CHECK(sum / n == doctest::Approx(0.5).epsilon(0.02));
    CHECK(std::fabs(low_half / static_cast<double>(n) - 0.5) < 0.02);
}

TEST_CASE("uniform(lo, hi) respects its bounds") {
    Rng rng(9);
    for (int i = 0; i < 10000; ++i) {
        const double v = rng.uniform(-1.0, 1.0);
        REQUIRE(v >= -1.0);
        REQUIRE(v < 1.0);
    }
}

TEST_CASE("uniform_int hits every residue without bias") {
    Rng rng(11);
    std::vector<int> counts(7, 0);
    const int n = 70000;
    for (int i = 0; i < n; ++i) {
        const uint64_t v = rng.uniform_int(7);
        REQUIRE(v < 7);
        ++counts[v];
    }
    for (const int c : counts)
        CHECK(std::fabs(c - n / 7.0) < 5.0 * std::sqrt(n / 7.0));
}

TEST_CASE("normal matches standard moments") {
    Rng rng(13);
    const int n = 200000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        sum += x;
        sum2 += x * x;
    }
    const double mean = sum / n;
    CHECK(mean == doctest::Approx(0.0).epsilon(1.0).scale(0.01));
    CHECK(sum2 / n - mean * mean == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("gumbel matches its known mean (Euler-Mascheroni)") {
    Rng rng(17);
    const int n = 200000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += rng.gumbel();
    CHECK(sum / n == doctest::Approx(0.5772156649).epsilon(0.02));
}

TEST_CASE("permutation is a bijection on [0, n)") {
    Rng rng(19);
    const auto p = rng.permutation(257);
    std::set<size_t> seen(p.begin(), p.end());
    CHECK(seen.size() == 257);
    CHECK(*seen.begin() == 0);
    CHECK(*seen.rbegin() == 256);
}

TEST_CASE("derive_seed is stable and tag-sensitive") {
    CHECK(rcc::derive_seed(5, "alpha") == rcc::derive_seed(5, "alpha"));
    CHECK(rcc::derive_seed(5, "alpha") != rcc::derive_seed(5, "beta"));
    CHECK(rcc::derive_seed(5, "alpha") != rcc::derive_seed(6, "alpha"));
}
