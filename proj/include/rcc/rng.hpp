#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace rcc {

// Deterministic stream of doubles built on splitmix64. All randomness in the
// toolkit flows through this type so runs are reproducible from a single seed.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64();

    // uniform in [0, 1)
    double uniform();
    double uniform(double lo, double hi);
    // uniform integer in [0, n)
    uint64_t uniform_int(uint64_t n);
    // standard normal via Box-Muller (two uniforms per pair, cached)
    double normal();
    double normal(double mu, double sigma);
    // standard Gumbel(0, 1)
    double gumbel();

    std::vector<size_t> permutation(size_t n);

private:
    uint64_t state_;
    bool has_cached_ = false;
    double cached_ = 0.0;
};

// Derives an independent sub-seed from a master seed and a textual tag.
// Used to fan one CLI-level seed out to per-module streams.
uint64_t derive_seed(uint64_t master, std::string_view tag);

}  // namespace rcc
