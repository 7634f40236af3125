#include "rcc/nets.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

#include "json.hpp"

namespace rcc {

using ad::Tape;
using ad::Tensor;
using nlohmann::json;

namespace {

std::vector<double> xavier_uniform(size_t n, size_t fan_in, size_t fan_out,
                                   Rng& rng) {
    const double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(-s, s);
    return v;
}

json params_to_json(const std::vector<NamedParam>& params) {
    json out = json::object();
    for (const auto& p : params) {
        out[p.name] = {{"shape", p.tensor.shape()},
                       {"values", p.tensor.data()}};
    }
    return out;
}

void params_from_json(const json& blob, std::vector<NamedParam>& params) {
    for (auto& p : params) {
        if (!blob.contains(p.name))
            throw std::runtime_error("model state: missing parameter " + p.name);
        const auto& entry = blob.at(p.name);
        const auto shape = entry.at("shape").get<std::vector<size_t>>();
        if (shape != p.tensor.shape())
            throw std::runtime_error("model state: shape mismatch for " + p.name);
        auto values = entry.at("values").get<std::vector<double>>();
        if (values.size() != p.tensor.size())
            throw std::runtime_error("model state: size mismatch for " + p.name);
        Tensor t = p.tensor;
        t.data() = std::move(values);
    }
}

void bn_buffers_to_json(json& out, const std::string& name,
                        const BatchNormLayer& bn) {
    out[name + ".run_mean"] = bn.run_mean;
    out[name + ".run_var"] = bn.run_var;
}

void bn_buffers_from_json(const json& blob, const std::string& name,
                          BatchNormLayer& bn) {
    bn.run_mean = blob.at(name + ".run_mean").get<std::vector<double>>();
    bn.run_var = blob.at(name + ".run_var").get<std::vector<double>>();
    if (bn.run_mean.size() != bn.gamma.size() ||
        bn.run_var.size() != bn.gamma.size())
        throw std::runtime_error("model state: bad running stats for " + name);
}

}  // namespace

DenseLayer::DenseLayer(Tape& tape, size_t in, size_t out, Rng& rng) {
    W = tape.leaf({in, out}, xavier_uniform(in * out, in, out, rng), true);
    b = tape.zeros({out}, true);
}

Tensor DenseLayer::forward(Tape& tape, const Tensor& x) const {
    return tape.add_rowwise(tape.matmul(x, W), b);
}

void DenseLayer::collect(const std::string& prefix,
                         std::vector<NamedParam>& out) const {
    out.push_back({prefix + ".W", W});
    out.push_back({prefix + ".b", b});
}

Conv1dLayer::Conv1dLayer(Tape& tape, size_t in_ch, size_t out_ch, size_t kernel,
                         Rng& rng) {
    const size_t fan_in = in_ch * kernel, fan_out = out_ch * kernel;
    W = tape.leaf({out_ch, in_ch, kernel},
                  xavier_uniform(out_ch * in_ch * kernel, fan_in, fan_out, rng),
                  true);
    b = tape.zeros({out_ch}, true);
}

Tensor Conv1dLayer::forward(Tape& tape, const Tensor& x) const {
    return tape.conv1d(x, W, b);
}

void Conv1dLayer::collect(const std::string& prefix,
                          std::vector<NamedParam>& out) const {
    out.push_back({prefix + ".W", W});
    out.push_back({prefix + ".b", b});
}

BatchNormLayer::BatchNormLayer(Tape& tape, size_t channels, double momentum,
                               double eps)
    : momentum(momentum), eps(eps) {
    gamma = tape.leaf({channels}, std::vector<double>(channels, 1.0), true);
    beta = tape.zeros({channels}, true);
    run_mean.assign(channels, 0.0);
    run_var.assign(channels, 1.0);
}

Tensor BatchNormLayer::forward(Tape& tape, const Tensor& x, bool training) {
    return tape.batch_norm(x, gamma, beta, run_mean, run_var, momentum, eps,
                           training);
}

void BatchNormLayer::collect(const std::string& prefix,
                             std::vector<NamedParam>& out) const {
    out.push_back({prefix + ".gamma", gamma});
    out.push_back({prefix + ".beta", beta});
}

ResidualBlock::ResidualBlock(Tape& tape, size_t in_ch, size_t filters,
                             size_t length, double tau, double bn_momentum,
                             double bn_eps, Rng& rng)
    : conv1(tape, in_ch, filters, 3, rng),
      conv2(tape, filters, filters, 3, rng),
      conv3(tape, filters, filters, 3, rng),
      conv4(tape, filters, filters, 3, rng),
      conv5(tape, filters, filters, 3, rng),
      conv6(tape, filters, filters, 3, rng),
      conv7(tape, filters, filters, 3, rng),
      bn1(tape, filters, bn_momentum, bn_eps),
      bn2(tape, filters, bn_momentum, bn_eps),
      bn3(tape, filters, bn_momentum, bn_eps),
      channel_proj(tape, 2 * filters, filters, 1, rng),
      shortcut(tape, in_ch, filters, 1, rng),
      gumbel_tau(tau) {
    length_proj = tape.leaf({2 * length, length},
                            xavier_uniform(2 * length * length, 2 * length,
                                           length, rng),
                            true);
}

Tensor ResidualBlock::forward(Tape& tape, const Tensor& x, Rng& rng,
                              bool training) {
    Tensor h = tape.relu(bn1.forward(tape, conv1.forward(tape, x), training));
    h = tape.upsample_linear2(conv2.forward(tape, h));
    h = tape.relu(bn2.forward(tape, conv3.forward(tape, h), training));
    h = tape.upsample_linear2(conv4.forward(tape, h));
    h = tape.relu(bn3.forward(tape, conv5.forward(tape, h), training));
    h = tape.downsample_avg2(conv6.forward(tape, h));
    h = conv7.forward(tape, h);  // (N, F, 2L)
    const Tensor side = tape.gumbel_softmax(h, gumbel_tau, rng);
    Tensor merged = channel_proj.forward(tape, tape.concat({h, side}, 1));
    const auto& s = merged.shape();  // (N, F, 2L)
    const Tensor flat = tape.reshape(merged, {s[0] * s[1], s[2]});
    const Tensor shrunk =
        tape.reshape(tape.matmul(flat, length_proj), {s[0], s[1], s[2] / 2});
    return tape.add(shrunk, shortcut.forward(tape, x));
}

void ResidualBlock::collect(const std::string& prefix,
                            std::vector<NamedParam>& out) const {
    conv1.collect(prefix + ".conv1", out);
    conv2.collect(prefix + ".conv2", out);
    conv3.collect(prefix + ".conv3", out);
    conv4.collect(prefix + ".conv4", out);
    conv5.collect(prefix + ".conv5", out);
    conv6.collect(prefix + ".conv6", out);
    conv7.collect(prefix + ".conv7", out);
    bn1.collect(prefix + ".bn1", out);
    bn2.collect(prefix + ".bn2", out);
    bn3.collect(prefix + ".bn3", out);
    channel_proj.collect(prefix + ".channel_proj", out);
    out.push_back({prefix + ".length_proj", length_proj});
    shortcut.collect(prefix + ".shortcut", out);
}

namespace {

void conv_view(const std::string& name, const Conv1dLayer& layer,
               std::vector<WeightMatrix>& out) {
    const auto& s = layer.W.shape();  // (F, C, K)
    out.push_back({name, layer.W, s[0], s[1] * s[2]});
}

}  // namespace

void ResidualBlock::weight_views(const std::string& prefix,
                                 std::vector<WeightMatrix>& out) const {
    conv_view(prefix + ".conv1.W", conv1, out);
    conv_view(prefix + ".conv2.W", conv2, out);
    conv_view(prefix + ".conv3.W", conv3, out);
    conv_view(prefix + ".conv4.W", conv4, out);
    conv_view(prefix + ".conv5.W", conv5, out);
    conv_view(prefix + ".conv6.W", conv6, out);
    conv_view(prefix + ".conv7.W", conv7, out);
    conv_view(prefix + ".channel_proj.W", channel_proj, out);
    const auto& s = length_proj.shape();
    out.push_back({prefix + ".length_proj", length_proj, s[0], s[1]});
    conv_view(prefix + ".shortcut.W", shortcut, out);
}

NonLocalBlock::NonLocalBlock(Tape& tape, size_t filters, Rng& rng)
    : theta(tape, filters, std::max<size_t>(1, filters / 2), 1, rng),
      phi(tape, filters, std::max<size_t>(1, filters / 2), 1, rng),
      g(tape, filters, std::max<size_t>(1, filters / 2), 1, rng),
      out_proj(tape, std::max<size_t>(1, filters / 2), filters, 1, rng) {}

Tensor NonLocalBlock::forward(Tape& tape, const Tensor& x) const {
    const auto& s = x.shape();  // (N, F, L)
    const size_t n = s[0], half = theta.W.shape()[0], len = s[2];
    const Tensor t = theta.forward(tape, x);
    const Tensor p = phi.forward(tape, x);
    const Tensor v = g.forward(tape, x);
    std::vector<Tensor> rows;
    rows.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        const Tensor ti = tape.reshape(tape.slice(t, 0, i, 1), {half, len});
        const Tensor pi = tape.reshape(tape.slice(p, 0, i, 1), {half, len});
        const Tensor vi = tape.reshape(tape.slice(v, 0, i, 1), {half, len});
        // attention[a][b]: how much position a attends to position b
        const Tensor attn =
            tape.softmax_last(tape.matmul(tape.transpose2(ti), pi));
        const Tensor mixed = tape.matmul(vi, tape.transpose2(attn));
        rows.push_back(tape.reshape(mixed, {1, half, len}));
    }
    const Tensor y = tape.concat(rows, 0);
    return tape.add(out_proj.forward(tape, y), x);
}

void NonLocalBlock::collect(const std::string& prefix,
                            std::vector<NamedParam>& out) const {
    theta.collect(prefix + ".theta", out);
    phi.collect(prefix + ".phi", out);
    g.collect(prefix + ".g", out);
    out_proj.collect(prefix + ".out_proj", out);
}

void NonLocalBlock::weight_views(const std::string& prefix,
                                 std::vector<WeightMatrix>& out) const {
    conv_view(prefix + ".theta.W", theta, out);
    conv_view(prefix + ".phi.W", phi, out);
    conv_view(prefix + ".g.W", g, out);
    conv_view(prefix + ".out_proj.W", out_proj, out);
}

Generator::Generator(Tape& tape, const GeneratorConfig& cfg, size_t cond_width,
                     std::vector<LayoutSegment> segments, size_t out_width,
                     uint64_t seed)
    : cfg_(cfg),
      cond_width_(cond_width),
      out_width_(out_width),
      segments_(std::move(segments)) {
    if (cfg_.d_z == 0 || cfg_.bin_len == 0)
        throw std::invalid_argument("generator: d_z and bin_len must be positive");
    if (cfg_.varpi < 2 || cfg_.varpi % 2 != 0)
        throw std::invalid_argument("generator: varpi must be even and >= 2");
    if (cfg_.filters == 0 || cfg_.channel_len == 0)
        throw std::invalid_argument(
            "generator: filters and channel_len must be positive");
    if (cfg_.gumbel_tau <= 0.0)
        throw std::invalid_argument("generator: gumbel_tau must be positive");
    if (out_width_ == 0)
        throw std::invalid_argument("generator: output width must be positive");
    size_t covered = 0;
    for (const auto& seg : segments_) {
        if (seg.offset != covered || seg.width == 0)
            throw std::invalid_argument("generator: segments must tile the row");
        covered += seg.width;
    }
    if (covered != out_width_)
        throw std::invalid_argument("generator: segments do not cover the row");

    Rng rng(derive_seed(seed, "generator.init"));
    const size_t f = cfg_.filters, len = cfg_.channel_len;
    const size_t hidden = 2 * len;
    lin1_ = DenseLayer(tape, cfg_.bin_len + cond_width_, hidden, rng);
    lin2_ = DenseLayer(tape, hidden, len, rng);
    res1_ = ResidualBlock(tape, cfg_.varpi / 2, f, len, cfg_.gumbel_tau,
                          cfg_.bn_momentum, cfg_.bn_eps, rng);
    res2_ = ResidualBlock(tape, f + cfg_.varpi / 2, f, len, cfg_.gumbel_tau,
                          cfg_.bn_momentum, cfg_.bn_eps, rng);
    res3_ = ResidualBlock(tape, 2 * f, f, len, cfg_.gumbel_tau,
                          cfg_.bn_momentum, cfg_.bn_eps, rng);
    nl_ = NonLocalBlock(tape, f, rng);
    head_mu_ = DenseLayer(tape, f * len, out_width_, rng);
    head_sigma_ = DenseLayer(tape, f * len, out_width_, rng);
}

GeneratorOutput Generator::forward(Tape& tape, const Tensor& z,
                                   const Tensor& cond, Rng& rng,
                                   bool training) {
    if (z.shape().size() != 2 || z.shape()[1] != cfg_.d_z)
        throw std::invalid_argument("generator: noise must be (N, d_z)");
    if (cond_width_ > 0 &&
        (cond.shape().size() != 2 || cond.shape()[1] != cond_width_ ||
         cond.shape()[0] != z.shape()[0]))
        throw std::invalid_argument("generator: condition must be (N, k)");
    const size_t n = z.shape()[0];
    const size_t nb = (cfg_.d_z + cfg_.bin_len - 1) / cfg_.bin_len;

    Tensor padded = z;
    if (nb * cfg_.bin_len != cfg_.d_z) {
        const Tensor pad = tape.zeros({n, nb * cfg_.bin_len - cfg_.d_z}, false);
        padded = tape.concat({z, pad}, 1);
    }

    std::vector<Tensor> channels;
    channels.reserve(cfg_.varpi);
    for (size_t j = 0; j < cfg_.varpi; ++j) {
        const Tensor bin =
            tape.slice(padded, 1, (j % nb) * cfg_.bin_len, cfg_.bin_len);
        const Tensor in =
            cond_width_ > 0 ? tape.concat({bin, cond}, 1) : bin;
        const Tensor h =
            lin2_.forward(tape, tape.relu(lin1_.forward(tape, in)));
        channels.push_back(tape.reshape(h, {n, 1, cfg_.channel_len}));
    }
    const size_t half = cfg_.varpi / 2;
    const Tensor left = tape.concat(
        std::vector<Tensor>(channels.begin(), channels.begin() + half), 1);
    const Tensor right = tape.concat(
        std::vector<Tensor>(channels.begin() + half, channels.end()), 1);

    const Tensor r1 = res1_.forward(tape, left, rng, training);
    const Tensor skip_lr =
        cfg_.disable_skip_lr
            ? tape.zeros({n, half, cfg_.channel_len}, false)
            : right;
    const Tensor r2 =
        res2_.forward(tape, tape.concat({r1, skip_lr}, 1), rng, training);
    const Tensor mid = cfg_.ablate_middle_residual ? r1 : r2;
    const Tensor skip_rr =
        cfg_.disable_skip_rr
            ? tape.zeros({n, cfg_.filters, cfg_.channel_len}, false)
            : r1;
    const Tensor r3 =
        res3_.forward(tape, tape.concat({mid, skip_rr}, 1), rng, training);

    const Tensor attended = nl_.forward(tape, r3);
    const Tensor flat =
        tape.reshape(attended, {n, cfg_.filters * cfg_.channel_len});

    GeneratorOutput out;
    out.mu = head_mu_.forward(tape, flat);
    out.sigma = tape.softplus(head_sigma_.forward(tape, flat));
    const Tensor raw = tape.gaussian_sample(out.mu, out.sigma, rng);

    std::vector<Tensor> parts;
    parts.reserve(segments_.size());
    for (const auto& seg : segments_) {
        const Tensor s = tape.slice(raw, 1, seg.offset, seg.width);
        switch (seg.kind) {
            case SegmentKind::Scalar:
                parts.push_back(tape.tanh_act(s));
                break;
            case SegmentKind::ModeSelect:
                parts.push_back(tape.gumbel_softmax(s, cfg_.gumbel_tau, rng));
                break;
            case SegmentKind::OneHot: {
                // map the simplex onto the [-1,1] one-hot convention
                const Tensor soft = tape.gumbel_softmax(s, cfg_.gumbel_tau, rng);
                const Tensor ones = tape.constant(
                    {n, seg.width}, std::vector<double>(n * seg.width, 1.0));
                parts.push_back(tape.sub(tape.scale(soft, 2.0), ones));
                break;
            }
        }
    }
    out.sampled = tape.concat(parts, 1);
    return out;
}

std::vector<NamedParam> Generator::named_params() const {
    std::vector<NamedParam> out;
    lin1_.collect("lin1", out);
    lin2_.collect("lin2", out);
    res1_.collect("res1", out);
    res2_.collect("res2", out);
    res3_.collect("res3", out);
    nl_.collect("nl", out);
    head_mu_.collect("head_mu", out);
    head_sigma_.collect("head_sigma", out);
    return out;
}

std::vector<Tensor> Generator::params() const {
    std::vector<Tensor> out;
    for (auto& p : named_params()) out.push_back(p.tensor);
    return out;
}

std::vector<WeightMatrix> Generator::weight_matrices() const {
    std::vector<WeightMatrix> out;
    const auto& w1 = lin1_.W.shape();
    out.push_back({"lin1.W", lin1_.W, w1[0], w1[1]});
    const auto& w2 = lin2_.W.shape();
    out.push_back({"lin2.W", lin2_.W, w2[0], w2[1]});
    res1_.weight_views("res1", out);
    res2_.weight_views("res2", out);
    res3_.weight_views("res3", out);
    nl_.weight_views("nl", out);
    const auto& hm = head_mu_.W.shape();
    out.push_back({"head_mu.W", head_mu_.W, hm[0], hm[1]});
    const auto& hs = head_sigma_.W.shape();
    out.push_back({"head_sigma.W", head_sigma_.W, hs[0], hs[1]});
    return out;
}

std::string Generator::state_to_json() const {
    json j;
    j["format"] = "rccsyn.generator";
    j["version"] = 1;
    j["config"] = {{"d_z", cfg_.d_z},
                   {"bin_len", cfg_.bin_len},
                   {"varpi", cfg_.varpi},
                   {"filters", cfg_.filters},
                   {"channel_len", cfg_.channel_len},
                   {"gumbel_tau", cfg_.gumbel_tau},
                   {"bn_momentum", cfg_.bn_momentum},
                   {"bn_eps", cfg_.bn_eps},
                   {"ablate_middle_residual", cfg_.ablate_middle_residual},
                   {"disable_skip_lr", cfg_.disable_skip_lr},
                   {"disable_skip_rr", cfg_.disable_skip_rr}};
    j["cond_width"] = cond_width_;
    j["out_width"] = out_width_;
    json segs = json::array();
    for (const auto& seg : segments_)
        segs.push_back({{"column", seg.column},
                        {"offset", seg.offset},
                        {"width", seg.width},
                        {"kind", static_cast<int>(seg.kind)}});
    j["segments"] = std::move(segs);
    j["params"] = params_to_json(named_params());
    json buffers = json::object();
    const std::pair<std::string, const BatchNormLayer*> bns[] = {
        {"res1.bn1", &res1_.bn1}, {"res1.bn2", &res1_.bn2},
        {"res1.bn3", &res1_.bn3}, {"res2.bn1", &res2_.bn1},
        {"res2.bn2", &res2_.bn2}, {"res2.bn3", &res2_.bn3},
        {"res3.bn1", &res3_.bn1}, {"res3.bn2", &res3_.bn2},
        {"res3.bn3", &res3_.bn3}};
    for (const auto& [name, bn] : bns) bn_buffers_to_json(buffers, name, *bn);
    j["buffers"] = std::move(buffers);
    return j.dump();
}

Generator Generator::state_from_json(Tape& tape, const std::string& text) {
    const json j = json::parse(text);
    if (j.at("format") != "rccsyn.generator" || j.at("version") != 1)
        throw std::runtime_error("generator state: unsupported format/version");
    const json& c = j.at("config");
    GeneratorConfig cfg;
    cfg.d_z = c.at("d_z").get<size_t>();
    cfg.bin_len = c.at("bin_len").get<size_t>();
    cfg.varpi = c.at("varpi").get<size_t>();
    cfg.filters = c.at("filters").get<size_t>();
    cfg.channel_len = c.at("channel_len").get<size_t>();
    cfg.gumbel_tau = c.at("gumbel_tau").get<double>();
    cfg.bn_momentum = c.at("bn_momentum").get<double>();
    cfg.bn_eps = c.at("bn_eps").get<double>();
    cfg.ablate_middle_residual = c.at("ablate_middle_residual").get<bool>();
    cfg.disable_skip_lr = c.at("disable_skip_lr").get<bool>();
    cfg.disable_skip_rr = c.at("disable_skip_rr").get<bool>();
    std::vector<LayoutSegment> segments;
    for (const auto& s : j.at("segments"))
        segments.push_back({s.at("column").get<size_t>(),
                            s.at("offset").get<size_t>(),
                            s.at("width").get<size_t>(),
                            static_cast<SegmentKind>(s.at("kind").get<int>())});
    Generator gen(tape, cfg, j.at("cond_width").get<size_t>(),
                  std::move(segments), j.at("out_width").get<size_t>(), 0);
    auto named = gen.named_params();
    params_from_json(j.at("params"), named);
    const json& buffers = j.at("buffers");
    const std::pair<std::string, BatchNormLayer*> bns[] = {
        {"res1.bn1", &gen.res1_.bn1}, {"res1.bn2", &gen.res1_.bn2},
        {"res1.bn3", &gen.res1_.bn3}, {"res2.bn1", &gen.res2_.bn1},
        {"res2.bn2", &gen.res2_.bn2}, {"res2.bn3", &gen.res2_.bn3},
        {"res3.bn1", &gen.res3_.bn1}, {"res3.bn2", &gen.res3_.bn2},
        {"res3.bn3", &gen.res3_.bn3}};
    for (const auto& [name, bn] : bns) bn_buffers_from_json(buffers, name, *bn);
    return gen;
}

Discriminator::Discriminator(Tape& tape, const DiscriminatorConfig& cfg,
                             size_t row_width, size_t cond_width, uint64_t seed)
    : cfg_(cfg), row_width_(row_width), cond_width_(cond_width) {
    if (row_width_ == 0)
        throw std::invalid_argument("discriminator: row width must be positive");
    if (cfg_.kernel % 2 == 0)
        throw std::invalid_argument("discriminator: kernel must be odd");
    Rng rng(derive_seed(seed, "discriminator.init"));
    conv1_ = Conv1dLayer(tape, 1, cfg_.filters1, cfg_.kernel, rng);
    conv2_ = Conv1dLayer(tape, cfg_.filters1, cfg_.filters2, cfg_.kernel, rng);
    conv3_ = Conv1dLayer(tape, cfg_.filters2, cfg_.filters3, cfg_.kernel, rng);
    bn_ = BatchNormLayer(tape, cfg_.filters3, cfg_.bn_momentum, cfg_.bn_eps);
    head_ = DenseLayer(tape, cfg_.filters3 * (row_width_ + cond_width_), 1, rng);
}

Tensor Discriminator::forward(Tape& tape, const Tensor& rows,
                              const Tensor& cond, bool training) {
    if (rows.shape().size() != 2 || rows.shape()[1] != row_width_)
        throw std::invalid_argument("discriminator: rows must be (N, W)");
    const size_t n = rows.shape()[0];
    Tensor x = rows;
    if (cond_width_ > 0) {
        if (cond.shape().size() != 2 || cond.shape()[1] != cond_width_ ||
            cond.shape()[0] != n)
            throw std::invalid_argument("discriminator: condition must be (N, k)");
        x = tape.concat({rows, cond}, 1);
    }
    const size_t len = row_width_ + cond_width_;
    Tensor h = tape.reshape(x, {n, 1, len});
    h = tape.relu(conv1_.forward(tape, h));
    h = tape.relu(conv2_.forward(tape, h));
    h = tape.relu(bn_.forward(tape, conv3_.forward(tape, h), training));
    h = tape.reshape(h, {n, cfg_.filters3 * len});
    return head_.forward(tape, h);
}

std::vector<NamedParam> Discriminator::named_params() const {
    std::vector<NamedParam> out;
    conv1_.collect("conv1", out);
    conv2_.collect("conv2", out);
    conv3_.collect("conv3", out);
    bn_.collect("bn", out);
    head_.collect("head", out);
    return out;
}

std::vector<Tensor> Discriminator::params() const {
    std::vector<Tensor> out;
    for (auto& p : named_params()) out.push_back(p.tensor);
    return out;
}

std::vector<WeightMatrix> Discriminator::weight_matrices() const {
    std::vector<WeightMatrix> out;
    conv_view("conv1.W", conv1_, out);
    conv_view("conv2.W", conv2_, out);
    conv_view("conv3.W", conv3_, out);
    const auto& hw = head_.W.shape();
    out.push_back({"head.W", head_.W, hw[0], hw[1]});
    return out;
}

std::string Discriminator::state_to_json() const {
    json j;
    j["format"] = "rccsyn.discriminator";
    j["version"] = 1;
    j["config"] = {{"filters1", cfg_.filters1},   {"filters2", cfg_.filters2},
                   {"filters3", cfg_.filters3},   {"kernel", cfg_.kernel},
                   {"bn_momentum", cfg_.bn_momentum}, {"bn_eps", cfg_.bn_eps}};
    j["row_width"] = row_width_;
    j["cond_width"] = cond_width_;
    j["params"] = params_to_json(named_params());
    json buffers = json::object();
    bn_buffers_to_json(buffers, "bn", bn_);
    j["buffers"] = std::move(buffers);
    return j.dump();
}

Discriminator Discriminator::state_from_json(Tape& tape,
                                             const std::string& text) {
    const json j = json::parse(text);
    if (j.at("format") != "rccsyn.discriminator" || j.at("version") != 1)
        throw std::runtime_error(
            "discriminator state: unsupported format/version");
    const json& c = j.at("config");
    DiscriminatorConfig cfg;
    cfg.filters1 = c.at("filters1").get<size_t>();
    cfg.filters2 = c.at("filters2").get<size_t>();
    cfg.filters3 = c.at("filters3").get<size_t>();
    cfg.kernel = c.at("kernel").get<size_t>();
    cfg.bn_momentum = c.at("bn_momentum").get<double>();
    cfg.bn_eps = c.at("bn_eps").get<double>();
    Discriminator disc(tape, cfg, j.at("row_width").get<size_t>(),
                       j.at("cond_width").get<size_t>(), 0);
    auto named = disc.named_params();
    params_from_json(j.at("params"), named);
    bn_buffers_from_json(j.at("buffers"), "bn", disc.bn_);
    return disc;
}

}  // namespace rcc
