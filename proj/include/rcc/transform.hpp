#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "rcc/schema.hpp"

namespace rcc {

struct GaussianMode {
    double weight = 0.0;
    double mean = 0.0;
    double std = 1.0;
};

inline constexpr double kStdFloor = 1e-4;
inline constexpr int kDefaultModeBudget = 10;
inline constexpr double kDefaultNvmmEpsilon = 0.005;
inline constexpr int kDefaultNvmmMaxRetries = 1000;
inline constexpr double kDefaultClipWidth = 4.0;

// EM-fitted Gaussian mixture with variational-style pruning: modes whose
// weight falls below 1/(10*m_c) are deactivated and carry weight 0.
struct VgmModel {
    std::vector<GaussianMode> modes;
    std::vector<bool> active;
    int mode_budget = kDefaultModeBudget;
    std::vector<double> log_likelihood_trace;

    size_t active_count() const;
    std::vector<size_t> active_indices() const;
};

VgmModel fit_vgm(const std::vector<double>& values, int m_c, int max_iter,
                 double tol, uint64_t seed);

// <alpha + beta*omega_k, sigma_k*omega_k> translation of the VGM modes, with
// (alpha, beta) rejection-sampled from U[-1,1] until every active mode
// satisfies |alpha + beta*omega_k - mu_k| >= epsilon.
struct NvmmParams {
    double alpha = 0.0;
    double beta = 0.0;
    double epsilon = kDefaultNvmmEpsilon;
    // Indexed like VgmModel::modes; meaningful at active indices only.
    std::vector<double> omega;
    std::vector<double> mu_tilde;
    std::vector<double> sigma_tilde;
};

NvmmParams reparameterize_nvmm(const VgmModel& vgm, double epsilon,
                               uint64_t seed,
                               int max_retries = kDefaultNvmmMaxRetries);

struct ContinuousEncoder {
    VgmModel vgm;
    NvmmParams nvmm;
    double clip_width = kDefaultClipWidth;

    size_t width() const { return vgm.active_count() + 1; }
};

struct CategoricalEncoder {
    std::vector<std::string> categories;

    size_t width() const { return categories.size(); }
};

// vector = one-hot over active modes (argmax responsibility, ties to the
// lower index) followed by (value - mu_tilde)/(clip_width*sigma_tilde)
// clipped to [-1, 1].
std::vector<double> encode_continuous(double value, const ContinuousEncoder& enc);
double decode_continuous(std::span<const double> vec, const ContinuousEncoder& enc);

// One-hot of width K mapped to [-1, 1]: hot position +1, others -1.
std::vector<double> encode_categorical(int category_index,
                                       const CategoricalEncoder& enc);
int decode_categorical(std::span<const double> vec, const CategoricalEncoder& enc);

enum class SegmentKind { ModeSelect, Scalar, OneHot };

struct LayoutSegment {
    size_t column;  // source column index in the schema
    size_t offset;
    size_t width;
    SegmentKind kind;
};

struct ColumnLayout {
    size_t offset;
    size_t width;
    ColumnKind kind;
};

// Per-column encoders plus the flat layout of an encoded row.
struct RowEncoder {
    std::vector<ColumnSchema> schema;
    std::vector<std::variant<ContinuousEncoder, CategoricalEncoder>> encoders;
    std::vector<ColumnLayout> layout;
    std::vector<LayoutSegment> segments;
    size_t total_width = 0;
};

struct FitOptions {
    int mode_budget = kDefaultModeBudget;
    int max_iter = 100;
    double tol = 1e-6;
    double epsilon = kDefaultNvmmEpsilon;
    int max_retries = kDefaultNvmmMaxRetries;
    double clip_width = kDefaultClipWidth;
};

RowEncoder fit_encoders(const Table& table, const FitOptions& opts, uint64_t seed);

std::vector<double> encode_row(const std::vector<Field>& row, const RowEncoder& enc);
std::vector<Field> decode_row(std::span<const double> vec, const RowEncoder& enc);

std::vector<std::vector<double>> encode_table(const Table& table,
                                              const RowEncoder& enc);
Table decode_table(const std::vector<std::vector<double>>& encoded,
                   const RowEncoder& enc);

// Versioned JSON round-trip so sample-time decoding is bit-reproducible.
std::string row_encoder_to_json(const RowEncoder& enc);
RowEncoder row_encoder_from_json(const std::string& json_text);

}  // namespace rcc
