#pragma once

#include <cstdint>
#include <vector>

#include "rcc/rng.hpp"
#include "rcc/schema.hpp"

namespace rcc {

inline constexpr int kDefaultCantorDepth = 32;

// Draws Cantor-distributed values by emitting `depth` random ternary digits
// from {0, 2}. Outputs lie in [0, 1] and avoid every removed middle-third
// interval up to the digit resolution.
class CantorSampler {
public:
    CantorSampler(int depth, uint64_t seed);

    double next();
    int depth() const { return depth_; }

private:
    int depth_;
    Rng rng_;
};

std::vector<double> sample_cantor(size_t n, int depth, uint64_t seed);

// Truncated moment generating function of the Cantor distribution:
// e^{t/2} * prod_{k=1..k_max} cosh(t * 3^-k). Throws on overflow.
double mgf_cantor(double t, int k_max);

struct CompoundCondVector {
    std::vector<double> eta_d;  // one Cantor draw per discrete one-hot slot
    std::vector<double> eta_b;  // one Cantor draw per binary one-hot slot

    size_t k_d() const { return eta_d.size(); }
    size_t k_b() const { return eta_b.size(); }
    size_t size() const { return eta_d.size() + eta_b.size(); }
    std::vector<double> concatenated() const;
};

// Total one-hot widths of the discrete and binary columns of a schema.
size_t discrete_onehot_width(const std::vector<ColumnSchema>& schema);
size_t binary_onehot_width(const std::vector<ColumnSchema>& schema);

CompoundCondVector build_cond_vector(const std::vector<ColumnSchema>& schema,
                                     int depth, uint64_t seed);

// Stateful variant used by the training loop: one fresh vector per sample,
// with independent streams for the discrete and binary segments.
class CondSampler {
public:
    CondSampler(const std::vector<ColumnSchema>& schema, int depth, uint64_t seed);

    CompoundCondVector next();
    size_t width() const { return k_d_ + k_b_; }

private:
    size_t k_d_, k_b_;
    CantorSampler discrete_stream_;
    CantorSampler binary_stream_;
};

}  // namespace rcc
