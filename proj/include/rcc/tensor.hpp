#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "rcc/rng.hpp"

namespace rcc::ad {

struct Node {
    std::vector<size_t> shape;
    std::vector<double> value;
    std::vector<double> grad;
    bool requires_grad = false;
};

// Shared handle to a dense double tensor living on a tape.
class Tensor {
public:
    Tensor() = default;

    bool defined() const { return static_cast<bool>(node_); }
    const std::vector<size_t>& shape() const { return node_->shape; }
    size_t size() const { return node_->value.size(); }
    std::vector<double>& data() { return node_->value; }
    const std::vector<double>& data() const { return node_->value; }
    std::vector<double>& grad() { return node_->grad; }
    const std::vector<double>& grad() const { return node_->grad; }
    bool requires_grad() const { return node_->requires_grad; }
    double scalar() const;

private:
    friend class Tape;
    explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}
    std::shared_ptr<Node> node_;
};

std::string shape_string(const std::vector<size_t>& shape);
size_t shape_numel(const std::vector<size_t>& shape);

// Records forward operations and replays their backward rules in reverse
// order. Leaves are created through the tape but survive clear(), so
// parameters persist across training iterations.
class Tape {
public:
    Tensor leaf(std::vector<size_t> shape, std::vector<double> data,
                bool requires_grad);
    Tensor zeros(std::vector<size_t> shape, bool requires_grad);
    Tensor constant(std::vector<size_t> shape, std::vector<double> data);
    // Copies values into a fresh non-differentiable leaf.
    Tensor detach(const Tensor& a);

    Tensor matmul(const Tensor& a, const Tensor& b);
    Tensor add(const Tensor& a, const Tensor& b);
    // (N,W) + (W,) bias broadcast over rows
    Tensor add_rowwise(const Tensor& a, const Tensor& bias);
    // (N,C,L) + (C,) bias broadcast per channel
    Tensor add_channelwise(const Tensor& a, const Tensor& bias);
    Tensor sub(const Tensor& a, const Tensor& b);
    Tensor mul(const Tensor& a, const Tensor& b);
    Tensor scale(const Tensor& a, double c);
    Tensor mean(const Tensor& a);
    Tensor sum(const Tensor& a);
    Tensor concat(const std::vector<Tensor>& parts, size_t axis);
    Tensor slice(const Tensor& a, size_t axis, size_t start, size_t len);
    Tensor reshape(const Tensor& a, std::vector<size_t> shape);
    Tensor transpose2(const Tensor& a);  // 2D transpose
    Tensor relu(const Tensor& a);
    Tensor tanh_act(const Tensor& a);
    Tensor softplus(const Tensor& a);
    Tensor softmax_last(const Tensor& a);
    // (N,C,L) * (F,C,K) -> (N,F,L), stride 1, zero same-padding, K odd
    Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& b);
    // x is (N,C,L) or (N,C); gamma/beta are (C,). Running statistics are
    // owned by the caller and updated in training mode with
    //   running = (1 - momentum) * running + momentum * batch.
    Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                      std::vector<double>& running_mean,
                      std::vector<double>& running_var, double momentum,
                      double eps, bool training);
    Tensor upsample_linear2(const Tensor& x);   // (N,C,L) -> (N,C,2L)
    Tensor downsample_avg2(const Tensor& x);    // (N,C,L) -> (N,C,ceil(L/2))
    // Softmax((logits + Gumbel noise) / tau) along the last axis.
    Tensor gumbel_softmax(const Tensor& logits, double tau, Rng& rng);
    // mu + sigma * eps with eps ~ N(0, I); gradients flow to mu and sigma.
    Tensor gaussian_sample(const Tensor& mu, const Tensor& sigma, Rng& rng);

    // Fills grads of every requires_grad node reachable from the scalar loss.
    void backward(const Tensor& loss);
    void clear() { ops_.clear(); }
    size_t op_count() const { return ops_.size(); }

private:
    struct OpRecord {
        std::function<void()> backward;
    };

    Tensor make(std::vector<size_t> shape, bool requires_grad);
    void record(std::function<void()> fn);

    std::vector<OpRecord> ops_;
};

struct AdamConfig {
    double lr = 1.2e-4;
    double beta1 = 0.0;
    double beta2 = 0.85;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<std::vector<double>> m, v;
    long step = 0;
};

void adam_step(std::vector<Tensor>& params, AdamState& state,
               const AdamConfig& cfg);
void zero_grads(std::vector<Tensor>& params);

}  // namespace rcc::ad
