#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rcc/rng.hpp"
#include "rcc/tensor.hpp"
#include "rcc/transform.hpp"

namespace rcc {

struct NamedParam {
    std::string name;
    ad::Tensor tensor;
};

// 2D view of a parameter for spectral monitoring and projection; conv kernels
// (F,C,K) are viewed as (F, C*K).
struct WeightMatrix {
    std::string name;
    ad::Tensor tensor;
    size_t rows = 0;
    size_t cols = 0;
};

struct DenseLayer {
    ad::Tensor W;  // (in, out)
    ad::Tensor b;  // (out,)

    DenseLayer() = default;
    DenseLayer(ad::Tape& tape, size_t in, size_t out, Rng& rng);
    ad::Tensor forward(ad::Tape& tape, const ad::Tensor& x) const;
    void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
};

struct Conv1dLayer {
    ad::Tensor W;  // (F, C, K)
    ad::Tensor b;  // (F,)

    Conv1dLayer() = default;
    Conv1dLayer(ad::Tape& tape, size_t in_ch, size_t out_ch, size_t kernel,
                Rng& rng);
    ad::Tensor forward(ad::Tape& tape, const ad::Tensor& x) const;
    void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
};

struct BatchNormLayer {
    ad::Tensor gamma, beta;  // (C,)
    std::vector<double> run_mean, run_var;
    double momentum = 0.22;
    double eps = 1e-2;

    BatchNormLayer() = default;
    BatchNormLayer(ad::Tape& tape, size_t channels, double momentum, double eps);
    ad::Tensor forward(ad::Tape& tape, const ad::Tensor& x, bool training);
    void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
};

// Conv stack with two 2x upsamplings and one 2x average-pool, so a (C,L)
// input leaves the conv path at (F,2L). A Gumbel-softmax side branch over
// positions is concatenated back (2F channels), squeezed to F by a 1x1
// conv, and the doubled length is mapped back to L by a projection shared
// across channels. A learned 1x1 shortcut closes the residual connection,
// so the block maps (N,C,L) -> (N,F,L).
struct ResidualBlock {
    Conv1dLayer conv1, conv2, conv3, conv4, conv5, conv6, conv7;
    BatchNormLayer bn1, bn2, bn3;
    Conv1dLayer channel_proj;  // 2F -> F, 1x1
    ad::Tensor length_proj;    // (2L, L), shared across channels
    Conv1dLayer shortcut;      // C -> F, 1x1
    double gumbel_tau = 0.16;

    ResidualBlock() = default;
    ResidualBlock(ad::Tape& tape, size_t in_ch, size_t filters, size_t length,
                  double tau, double bn_momentum, double bn_eps, Rng& rng);
    ad::Tensor forward(ad::Tape& tape, const ad::Tensor& x, Rng& rng,
                       bool training);
    void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
    void weight_views(const std::string& prefix,
                      std::vector<WeightMatrix>& out) const;
};

// Position self-attention over the length axis with a residual connection;
// shape-preserving on (N,F,L).
struct NonLocalBlock {
    Conv1dLayer theta, phi, g;  // F -> F/2, 1x1
    Conv1dLayer out_proj;       // F/2 -> F, 1x1

    NonLocalBlock() = default;
    NonLocalBlock(ad::Tape& tape, size_t filters, Rng& rng);
    ad::Tensor forward(ad::Tape& tape, const ad::Tensor& x) const;
    void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
    void weight_views(const std::string& prefix,
                      std::vector<WeightMatrix>& out) const;
};

struct GeneratorConfig {
    size_t d_z = 32;          // noise width
    size_t bin_len = 8;       // split-concat bin width
    size_t varpi = 8;         // channel count leaving the linear block; even
    size_t filters = 16;      // residual / attention channel count
    size_t channel_len = 16;  // per-channel feature length
    double gumbel_tau = 0.16;
    double bn_momentum = 0.22;
    double bn_eps = 1e-2;
    bool ablate_middle_residual = false;
    bool disable_skip_lr = false;
    bool disable_skip_rr = false;
};

struct GeneratorOutput {
    ad::Tensor mu;       // (N, W) location head
    ad::Tensor sigma;    // (N, W) softplus scale head
    ad::Tensor sampled;  // (N, W) activated synthetic rows
};

// Noise is split into ceil(d_z/bin_len) bins (last bin zero-padded), each
// concatenated with the condition vector and pushed through one shared
// two-layer projection; channel slot j reads bin (j mod nb), so the slot
// count varpi adds no parameters. The first varpi/2 channels feed the first
// residual block; the rest skip ahead and join the second block's input.
// The first block's output also skips to the third block's input. After
// position attention, mu/sigma heads parameterize per-row Gaussian samples
// that are activated segment-wise: Gumbel-softmax over one-hot segments
// (categorical segments affinely mapped onto [-1,1]) and tanh on scalars.
class Generator {
public:
    Generator() = default;
    Generator(ad::Tape& tape, const GeneratorConfig& cfg, size_t cond_width,
              std::vector<LayoutSegment> segments, size_t out_width,
              uint64_t seed);

    GeneratorOutput forward(ad::Tape& tape, const ad::Tensor& z,
                            const ad::Tensor& cond, Rng& rng, bool training);

    const GeneratorConfig& config() const { return cfg_; }
    size_t cond_width() const { return cond_width_; }
    size_t out_width() const { return out_width_; }
    const std::vector<LayoutSegment>& segments() const { return segments_; }

    std::vector<NamedParam> named_params() const;
    std::vector<ad::Tensor> params() const;
    std::vector<WeightMatrix> weight_matrices() const;

    std::string state_to_json() const;
    static Generator state_from_json(ad::Tape& tape, const std::string& text);

private:
    GeneratorConfig cfg_;
    size_t cond_width_ = 0;
    size_t out_width_ = 0;
    std::vector<LayoutSegment> segments_;

    DenseLayer lin1_, lin2_;
    ResidualBlock res1_, res2_, res3_;
    NonLocalBlock nl_;
    DenseLayer head_mu_, head_sigma_;
};

struct DiscriminatorConfig {
    size_t filters1 = 64;
    size_t filters2 = 64;
    size_t filters3 = 128;
    size_t kernel = 3;
    double bn_momentum = 0.22;
    double bn_eps = 1e-2;
};

// Critic scoring (row ++ cond) as a 1-channel sequence: two plain conv+relu
// stages, one conv+batchnorm+relu stage, then a linear head to one scalar
// score per row.
class Discriminator {
public:
    Discriminator() = default;
    Discriminator(ad::Tape& tape, const DiscriminatorConfig& cfg,
                  size_t row_width, size_t cond_width, uint64_t seed);

    // rows (N, row_width), cond (N, cond_width) -> scores (N, 1)
    ad::Tensor forward(ad::Tape& tape, const ad::Tensor& rows,
                       const ad::Tensor& cond, bool training);

    const DiscriminatorConfig& config() const { return cfg_; }
    size_t row_width() const { return row_width_; }
    size_t cond_width() const { return cond_width_; }

    std::vector<NamedParam> named_params() const;
    std::vector<ad::Tensor> params() const;
    std::vector<WeightMatrix> weight_matrices() const;

    std::string state_to_json() const;
    static Discriminator state_from_json(ad::Tape& tape,
                                         const std::string& text);

private:
    DiscriminatorConfig cfg_;
    size_t row_width_ = 0;
    size_t cond_width_ = 0;

    Conv1dLayer conv1_, conv2_, conv3_;
    BatchNormLayer bn_;
    DenseLayer head_;
};

}  // namespace rcc
