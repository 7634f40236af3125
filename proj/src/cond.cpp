#include "rcc/cond.hpp"

#include <cmath>
#include <stdexcept>

namespace rcc {

CantorSampler::CantorSampler(int depth, uint64_t seed) : depth_(depth), rng_(seed) {
    if (depth < 1) throw std::invalid_argument("CantorSampler: depth must be >= 1");
}

double CantorSampler::next() {
    double x = 0.0;
    double scale = 1.0;
    for (int i = 0; i < depth_; ++i) {
        scale /= 3.0;
        if (rng_.next_u64() & 1ull) x += 2.0 * scale;
    }
    return x;
}

std::vector<double> sample_cantor(size_t n, int depth, uint64_t seed) {
    CantorSampler sampler(depth, seed);
    std::vector<double> out(n);
    for (auto& v : out) v = sampler.next();
    return out;
}

double mgf_cantor(double t, int k_max) {
    if (k_max < 1) throw std::invalid_argument("mgf_cantor: k_max must be >= 1");
    double result = std::exp(t / 2.0);
    double pow3 = 1.0;
    for (int k = 1; k <= k_max; ++k) {
        pow3 /= 3.0;
        result *= std::cosh(t * pow3);
    }
    if (!std::isfinite(result))
        throw std::overflow_error("mgf_cantor: overflow at t=" + std::to_string(t));
    return result;
}

std::vector<double> CompoundCondVector::concatenated() const {
    std::vector<double> out;
    out.reserve(size());
    out.insert(out.end(), eta_d.begin(), eta_d.end());
    out.insert(out.end(), eta_b.begin(), eta_b.end());
    return out;
}

size_t discrete_onehot_width(const std::vector<ColumnSchema>& schema) {
    size_t w = 0;
    for (const auto& col : schema)
        if (col.kind == ColumnKind::Discrete) w += col.categories.size();
    return w;
}

size_t binary_onehot_width(const std::vector<ColumnSchema>& schema) {
    size_t w = 0;
    for (const auto& col : schema)
        if (col.kind == ColumnKind::Binary) w += col.categories.size();
    return w;
}

CompoundCondVector build_cond_vector(const std::vector<ColumnSchema>& schema,
                                     int depth, uint64_t seed) {
    CondSampler sampler(schema, depth, seed);
    return sampler.next();
}

CondSampler::CondSampler(const std::vector<ColumnSchema>& schema, int depth,
                         uint64_t seed)
    : k_d_(discrete_onehot_width(schema)),
      k_b_(binary_onehot_width(schema)),
      discrete_stream_(depth, derive_seed(seed, "cond.discrete")),
      binary_stream_(depth, derive_seed(seed, "cond.binary")) {}

CompoundCondVector CondSampler::next() {
    CompoundCondVector v;
    v.eta_d.resize(k_d_);
    for (auto& x : v.eta_d) x = discrete_stream_.next();
    v.eta_b.resize(k_b_);
    for (auto& x : v.eta_b) x = binary_stream_.next();
    return v;
}

}  // namespace rcc
