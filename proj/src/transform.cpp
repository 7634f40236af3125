#include "rcc/transform.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "json.hpp"
#include "rcc/rng.hpp"

namespace rcc {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

double log_normal_pdf(double x, double mu, double sigma) {
    const double z = (x - mu) / sigma;
    return -0.5 * (kLogTwoPi + z * z) - std::log(sigma);
}

double normal_pdf(double x, double mu, double sigma) {
    return std::exp(log_normal_pdf(x, mu, sigma));
}

}  // namespace

size_t VgmModel::active_count() const {
    size_t n = 0;
    for (const bool a : active) n += a ? 1 : 0;
    return n;
}

std::vector<size_t> VgmModel::active_indices() const {
    std::vector<size_t> idx;
    for (size_t i = 0; i < active.size(); ++i)
        if (active[i]) idx.push_back(i);
    return idx;
}

VgmModel fit_vgm(const std::vector<double>& values, int m_c, int max_iter,
                 double tol, uint64_t seed) {
    if (values.empty()) throw std::invalid_argument("fit_vgm: empty input");
    if (m_c < 1) throw std::invalid_argument("fit_vgm: mode budget must be >= 1");
    for (const double v : values)
        if (!std::isfinite(v))
            throw std::invalid_argument("fit_vgm: non-finite value in input");

    std::set<double> distinct(values.begin(), values.end());
    VgmModel model;
    model.mode_budget = m_c;

    if (distinct.size() == 1) {
        model.modes.push_back({1.0, values.front(), kStdFloor});
        model.active.push_back(true);
        return model;
    }

    const size_t k = std::min<size_t>(static_cast<size_t>(m_c), distinct.size());
    const size_t n = values.size();
    Rng rng(seed);

    // k-means++ seeding on the raw values
    std::vector<double> centers;
    centers.push_back(values[rng.uniform_int(n)]);
    std::vector<double> d2(n);
    while (centers.size() < k) {
        double total = 0.0;
        for (size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const double c : centers) {
                const double d = values[i] - c;
                best = std::min(best, d * d);
            }
            d2[i] = best;
            total += best;
        }
        if (total <= 0.0) {
            // all remaining points coincide with a center; any distinct value works
            for (const double v : distinct) {
                if (std::find(centers.begin(), centers.end(), v) == centers.end()) {
                    centers.push_back(v);
                    break;
                }
            }
            continue;
        }
        double pick = rng.uniform() * total;
        size_t chosen = n - 1;
        for (size_t i = 0; i < n; ++i) {
            pick -= d2[i];
            if (pick <= 0.0) {
                chosen = i;
                break;
            }
        }
        centers.push_back(values[chosen]);
    }

    // initial parameters from the nearest-center partition
    std::vector<double> mu(k), var(k), w(k);
    {
        std::vector<double> sum(k, 0.0), sumsq(k, 0.0);
        std::vector<size_t> count(k, 0);
        for (const double v : values) {
            size_t best = 0;
            double bd = std::numeric_limits<double>::infinity();
            for (size_t j = 0; j < k; ++j) {
                const double d = std::abs(v - centers[j]);
                if (d < bd) {
                    bd = d;
                    best = j;
                }
            }
            sum[best] += v;
            sumsq[best] += v * v;
            ++count[best];
        }
        double global_var = 0.0, global_mean = 0.0;
        for (const double v : values) global_mean += v;
        global_mean /= static_cast<double>(n);
        for (const double v : values)
            global_var += (v - global_mean) * (v - global_mean);
        global_var = std::max(global_var / static_cast<double>(n), kStdFloor * kStdFloor);
        for (size_t j = 0; j < k; ++j) {
            if (count[j] == 0) {
                mu[j] = centers[j];
                var[j] = global_var;
                w[j] = 1.0 / static_cast<double>(n);
            } else {
                mu[j] = sum[j] / static_cast<double>(count[j]);
                var[j] = sumsq[j] / static_cast<double>(count[j]) - mu[j] * mu[j];
                var[j] = std::max(var[j], kStdFloor * kStdFloor);
                w[j] = static_cast<double>(count[j]) / static_cast<double>(n);
            }
        }
        double wsum = 0.0;
        for (const double x : w) wsum += x;
        for (auto& x : w) x /= wsum;
    }

    // EM iterations; the log-likelihood trace is kept for monotonicity checks
    std::vector<double> resp(n * k);
    double prev_ll = -std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < max_iter; ++iter) {
        double ll = 0.0;
        for (size_t i = 0; i < n; ++i) {
            double mx = -std::numeric_limits<double>::infinity();
            for (size_t j = 0; j < k; ++j) {
                const double lp =
                    std::log(std::max(w[j], 1e-300)) +
                    log_normal_pdf(values[i], mu[j], std::sqrt(var[j]));
                resp[i * k + j] = lp;
                mx = std::max(mx, lp);
            }
            double z = 0.0;
            for (size_t j = 0; j < k; ++j)
                z += (resp[i * k + j] = std::exp(resp[i * k + j] - mx));
            for (size_t j = 0; j < k; ++j) resp[i * k + j] /= z;
            ll += mx + std::log(z);
        }
        model.log_likelihood_trace.push_back(ll);

        for (size_t j = 0; j < k; ++j) {
            double rj = 0.0, mj = 0.0;
            for (size_t i = 0; i < n; ++i) {
                rj += resp[i * k + j];
                mj += resp[i * k + j] * values[i];
            }
            if (rj < 1e-12) {
                w[j] = 0.0;  // dead mode; parameters kept as-is
                continue;
            }
            mj /= rj;
            double vj = 0.0;
            for (size_t i = 0; i < n; ++i)
                vj += resp[i * k + j] * (values[i] - mj) * (values[i] - mj);
            vj /= rj;
            w[j] = rj / static_cast<double>(n);
            mu[j] = mj;
            var[j] = std::max(vj, kStdFloor * kStdFloor);
        }
        if (ll - prev_ll < tol && iter > 0) break;
        prev_ll = ll;
    }

    // variational-style pruning
    const double prune_threshold = 1.0 / (10.0 * static_cast<double>(m_c));
    model.modes.resize(k);
    model.active.assign(k, false);
    size_t best = 0;
    for (size_t j = 1; j < k; ++j)
        if (w[j] > w[best]) best = j;
    double active_weight = 0.0;
    for (size_t j = 0; j < k; ++j) {
        model.modes[j] = {w[j], mu[j], std::max(std::sqrt(var[j]), kStdFloor)};
        model.active[j] = w[j] >= prune_threshold || j == best;
        if (model.active[j]) active_weight += w[j];
    }
    for (size_t j = 0; j < k; ++j) {
        if (model.active[j])
            model.modes[j].weight = w[j] / active_weight;
        else
            model.modes[j].weight = 0.0;
    }
    return model;
}

NvmmParams reparameterize_nvmm(const VgmModel& vgm, double epsilon,
                               uint64_t seed, int max_retries) {
    if (!(epsilon > 0.0))
        throw std::invalid_argument("reparameterize_nvmm: epsilon must be positive");
    const auto active = vgm.active_indices();
    if (active.empty())
        throw std::invalid_argument("reparameterize_nvmm: model has no active modes");

    Rng rng(seed);
    NvmmParams params;
    params.epsilon = epsilon;
    params.omega.assign(vgm.modes.size(), 0.0);
    params.mu_tilde.assign(vgm.modes.size(), 0.0);
    params.sigma_tilde.assign(vgm.modes.size(), 0.0);

    // one omega per mode, drawn from the fitted mixture and then frozen
    for (const size_t j : active) {
        const double pick = rng.uniform();
        double acc = 0.0;
        size_t comp = active.back();
        for (const size_t c : active) {
            acc += vgm.modes[c].weight;
            if (pick <= acc) {
                comp = c;
                break;
            }
        }
        params.omega[j] = rng.normal(vgm.modes[comp].mean, vgm.modes[comp].std);
    }

    for (int attempt = 0; attempt < max_retries; ++attempt) {
        const double alpha = rng.uniform(-1.0, 1.0);
        const double beta = rng.uniform(-1.0, 1.0);
        bool ok = true;
        for (const size_t j : active) {
            if (std::abs(alpha + beta * params.omega[j] - vgm.modes[j].mean) < epsilon) {
                ok = false;
                break;
            }
        }
        if (!ok) continue;
        params.alpha = alpha;
        params.beta = beta;
        for (const size_t j : active) {
            params.mu_tilde[j] = alpha + beta * params.omega[j];
            params.sigma_tilde[j] =
                std::max(std::abs(vgm.modes[j].std * params.omega[j]), kStdFloor);
        }
        return params;
    }
    throw std::runtime_error(
        "reparameterize_nvmm: uniformity constraint unsatisfiable after " +
        std::to_string(max_retries) +
        " attempts; epsilon is likely too large for this mixture");
}

std::vector<double> encode_continuous(double value, const ContinuousEncoder& enc) {
    if (!std::isfinite(value))
        throw std::invalid_argument("encode_continuous: non-finite value");
    const auto active = enc.vgm.active_indices();
    std::vector<double> out(active.size() + 1, 0.0);
    size_t sel = 0;
    double best = -std::numeric_limits<double>::infinity();
    for (size_t a = 0; a < active.size(); ++a) {
        const size_t j = active[a];
        const double r = enc.nvmm.omega[j] *
                         normal_pdf(value, enc.nvmm.mu_tilde[j],
                                    enc.nvmm.sigma_tilde[j]);
        if (r > best) {
            best = r;
            sel = a;
        }
    }
    out[sel] = 1.0;
    const size_t j = active[sel];
    const double scalar = (value - enc.nvmm.mu_tilde[j]) /
                          (enc.clip_width * enc.nvmm.sigma_tilde[j]);
    out.back() = std::clamp(scalar, -1.0, 1.0);
    return out;
}

double decode_continuous(std::span<const double> vec, const ContinuousEncoder& enc) {
    const auto active = enc.vgm.active_indices();
    if (vec.size() != active.size() + 1)
        throw std::invalid_argument("decode_continuous: expected width " +
                                    std::to_string(active.size() + 1) + ", got " +
                                    std::to_string(vec.size()));
    size_t sel = 0;
    for (size_t a = 1; a < active.size(); ++a)
        if (vec[a] > vec[sel]) sel = a;
    const size_t j = active[sel];
    return enc.nvmm.mu_tilde[j] +
           enc.clip_width * enc.nvmm.sigma_tilde[j] * vec[active.size()];
}

std::vector<double> encode_categorical(int category_index,
                                       const CategoricalEncoder& enc) {
    if (category_index < 0 ||
        static_cast<size_t>(category_index) >= enc.categories.size())
        throw std::invalid_argument("encode_categorical: index " +
                                    std::to_string(category_index) +
                                    " out of range for width " +
                                    std::to_string(enc.categories.size()));
    std::vector<double> out(enc.categories.size(), -1.0);
    out[static_cast<size_t>(category_index)] = 1.0;
    return out;
}

int decode_categorical(std::span<const double> vec, const CategoricalEncoder& enc) {
    if (vec.size() != enc.categories.size())
        throw std::invalid_argument("decode_categorical: expected width " +
                                    std::to_string(enc.categories.size()) +
                                    ", got " + std::to_string(vec.size()));
    size_t sel = 0;
    for (size_t i = 1; i < vec.size(); ++i)
        if (vec[i] > vec[sel]) sel = i;
    return static_cast<int>(sel);
}

RowEncoder fit_encoders(const Table& table, const FitOptions& opts, uint64_t seed) {
    RowEncoder enc;
    enc.schema = table.schema;
    size_t offset = 0;
    for (size_t c = 0; c < table.schema.size(); ++c) {
        const auto& col = table.schema[c];
        if (col.kind == ColumnKind::Continuous) {
            std::vector<double> values;
            values.reserve(table.row_count());
            for (const auto& row : table.rows) {
                if (row[c].is_null())
                    throw std::invalid_argument(
                        "fit_encoders: null in column '" + col.name +
                        "'; impute before fitting");
                values.push_back(row[c].real_value());
            }
            ContinuousEncoder ce;
            ce.vgm = fit_vgm(values, opts.mode_budget, opts.max_iter, opts.tol,
                             derive_seed(seed, "vgm:" + col.name));
            ce.nvmm = reparameterize_nvmm(ce.vgm, opts.epsilon,
                                          derive_seed(seed, "nvmm:" + col.name),
                                          opts.max_retries);
            ce.clip_width = opts.clip_width;
            const size_t w = ce.width();
            enc.segments.push_back({c, offset, w - 1, SegmentKind::ModeSelect});
            enc.segments.push_back({c, offset + w - 1, 1, SegmentKind::Scalar});
            enc.layout.push_back({offset, w, col.kind});
            enc.encoders.emplace_back(std::move(ce));
            offset += w;
        } else {
            CategoricalEncoder ce{col.categories};
            const size_t w = ce.width();
            enc.segments.push_back({c, offset, w, SegmentKind::OneHot});
            enc.layout.push_back({offset, w, col.kind});
            enc.encoders.emplace_back(std::move(ce));
            offset += w;
        }
    }
    enc.total_width = offset;
    return enc;
}

std::vector<double> encode_row(const std::vector<Field>& row, const RowEncoder& enc) {
    if (row.size() != enc.encoders.size())
        throw std::invalid_argument("encode_row: row width mismatch");
    std::vector<double> out;
    out.reserve(enc.total_width);
    for (size_t c = 0; c < row.size(); ++c) {
        if (row[c].is_null())
            throw std::invalid_argument("encode_row: null field at column " +
                                        std::to_string(c));
        if (const auto* ce = std::get_if<ContinuousEncoder>(&enc.encoders[c])) {
            const auto v = encode_continuous(row[c].real_value(), *ce);
            out.insert(out.end(), v.begin(), v.end());
        } else {
            const auto& ke = std::get<CategoricalEncoder>(enc.encoders[c]);
            const auto v = encode_categorical(row[c].category_index(), ke);
            out.insert(out.end(), v.begin(), v.end());
        }
    }
    return out;
}

std::vector<Field> decode_row(std::span<const double> vec, const RowEncoder& enc) {
    if (vec.size() != enc.total_width)
        throw std::invalid_argument("decode_row: expected width " +
                                    std::to_string(enc.total_width) + ", got " +
                                    std::to_string(vec.size()));
    std::vector<Field> row;
    row.reserve(enc.encoders.size());
    for (size_t c = 0; c < enc.encoders.size(); ++c) {
        const auto& lay = enc.layout[c];
        const auto seg = vec.subspan(lay.offset, lay.width);
        if (const auto* ce = std::get_if<ContinuousEncoder>(&enc.encoders[c])) {
            row.push_back(Field::real(decode_continuous(seg, *ce)));
        } else {
            const auto& ke = std::get<CategoricalEncoder>(enc.encoders[c]);
            row.push_back(Field::category(decode_categorical(seg, ke)));
        }
    }
    return row;
}

std::vector<std::vector<double>> encode_table(const Table& table,
                                              const RowEncoder& enc) {
    std::vector<std::vector<double>> out;
    out.reserve(table.row_count());
    for (const auto& row : table.rows) out.push_back(encode_row(row, enc));
    return out;
}

Table decode_table(const std::vector<std::vector<double>>& encoded,
                   const RowEncoder& enc) {
    Table table;
    table.schema = enc.schema;
    table.rows.reserve(encoded.size());
    for (const auto& vec : encoded) table.rows.push_back(decode_row(vec, enc));
    return table;
}

namespace {

using nlohmann::json;

json schema_to_json(const std::vector<ColumnSchema>& schema) {
    json cols = json::array();
    for (const auto& col : schema) {
        json c{{"name", col.name},
               {"kind", to_string(col.kind)},
               {"categories", col.categories}};
        if (col.role)
            c["role"] = *col.role == ColumnRole::Target ? "target" : "feature";
        cols.push_back(std::move(c));
    }
    return cols;
}

std::vector<ColumnSchema> schema_from_json(const json& cols) {
    std::vector<ColumnSchema> schema;
    for (const auto& c : cols) {
        ColumnSchema col;
        col.name = c.at("name").get<std::string>();
        col.kind = column_kind_from_string(c.at("kind").get<std::string>());
        col.categories = c.at("categories").get<std::vector<std::string>>();
        if (c.contains("role"))
            col.role = c["role"] == "target" ? ColumnRole::Target : ColumnRole::Feature;
        schema.push_back(std::move(col));
    }
    return schema;
}

}  // namespace

std::string row_encoder_to_json(const RowEncoder& enc) {
    json j;
    j["format"] = "rccsyn.encoders";
    j["version"] = 1;
    j["schema"] = schema_to_json(enc.schema);
    json encoders = json::array();
    for (const auto& e : enc.encoders) {
        if (const auto* ce = std::get_if<ContinuousEncoder>(&e)) {
            json modes = json::array();
            for (const auto& m : ce->vgm.modes)
                modes.push_back({{"weight", m.weight}, {"mean", m.mean}, {"std", m.std}});
            std::vector<int> active(ce->vgm.active.begin(), ce->vgm.active.end());
            encoders.push_back(
                {{"type", "continuous"},
                 {"modes", std::move(modes)},
                 {"active", active},
                 {"mode_budget", ce->vgm.mode_budget},
                 {"alpha", ce->nvmm.alpha},
                 {"beta", ce->nvmm.beta},
                 {"epsilon", ce->nvmm.epsilon},
                 {"omega", ce->nvmm.omega},
                 {"clip_width", ce->clip_width}});
        } else {
            const auto& ke = std::get<CategoricalEncoder>(e);
            encoders.push_back({{"type", "categorical"}, {"categories", ke.categories}});
        }
    }
    j["encoders"] = std::move(encoders);
    return j.dump(2);
}

RowEncoder row_encoder_from_json(const std::string& json_text) {
    const json j = json::parse(json_text);
    if (j.at("format") != "rccsyn.encoders" || j.at("version") != 1)
        throw std::runtime_error("row_encoder_from_json: unsupported format/version");
    RowEncoder enc;
    enc.schema = schema_from_json(j.at("schema"));
    size_t offset = 0;
    size_t c = 0;
    for (const auto& e : j.at("encoders")) {
        if (e.at("type") == "continuous") {
            ContinuousEncoder ce;
            for (const auto& m : e.at("modes"))
                ce.vgm.modes.push_back({m.at("weight"), m.at("mean"), m.at("std")});
            for (const int a : e.at("active").get<std::vector<int>>())
                ce.vgm.active.push_back(a != 0);
            ce.vgm.mode_budget = e.at("mode_budget");
            ce.nvmm.alpha = e.at("alpha");
            ce.nvmm.beta = e.at("beta");
            ce.nvmm.epsilon = e.at("epsilon");
            ce.nvmm.omega = e.at("omega").get<std::vector<double>>();
            ce.nvmm.mu_tilde.assign(ce.vgm.modes.size(), 0.0);
            ce.nvmm.sigma_tilde.assign(ce.vgm.modes.size(), 0.0);
            for (const size_t jdx : ce.vgm.active_indices()) {
                ce.nvmm.mu_tilde[jdx] = ce.nvmm.alpha + ce.nvmm.beta * ce.nvmm.omega[jdx];
                ce.nvmm.sigma_tilde[jdx] = std::max(
                    std::abs(ce.vgm.modes[jdx].std * ce.nvmm.omega[jdx]), kStdFloor);
            }
            ce.clip_width = e.at("clip_width");
            const size_t w = ce.width();
            enc.segments.push_back({c, offset, w - 1, SegmentKind::ModeSelect});
            enc.segments.push_back({c, offset + w - 1, 1, SegmentKind::Scalar});
            enc.layout.push_back({offset, w, ColumnKind::Continuous});
            enc.encoders.emplace_back(std::move(ce));
            offset += w;
        } else {
            CategoricalEncoder ke{e.at("categories").get<std::vector<std::string>>()};
            const size_t w = ke.width();
            enc.segments.push_back({c, offset, w, SegmentKind::OneHot});
            enc.layout.push_back({offset, w, enc.schema[c].kind});
            enc.encoders.emplace_back(std::move(ke));
            offset += w;
        }
        ++c;
    }
    enc.total_width = offset;
    return enc;
}

}  // namespace rcc
