#include "rcc/schema.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "rcc/rng.hpp"

namespace rcc {

const char* to_string(ColumnKind kind) {
    switch (kind) {
        case ColumnKind::Continuous: return "continuous";
        case ColumnKind::Discrete: return "discrete";
        case ColumnKind::Binary: return "binary";
    }
    return "?";
}

ColumnKind column_kind_from_string(const std::string& s) {
    if (s == "continuous") return ColumnKind::Continuous;
    if (s == "discrete") return ColumnKind::Discrete;
    if (s == "binary") return ColumnKind::Binary;
    throw std::invalid_argument("unknown column kind: " + s);
}

double Field::real_value() const {
    if (tag_ != Tag::Real) throw std::logic_error("field is not a real value");
    return value_;
}

int Field::category_index() const {
    if (tag_ != Tag::Category) throw std::logic_error("field is not a category");
    return index_;
}

bool Field::operator==(const Field& other) const {
    if (tag_ != other.tag_) return false;
    switch (tag_) {
        case Tag::Real: return value_ == other.value_;
        case Tag::Category: return index_ == other.index_;
        case Tag::Null: return true;
    }
    return false;
}

int Table::column_index(const std::string& name) const {
    for (size_t i = 0; i < schema.size(); ++i)
        if (schema[i].name == name) return static_cast<int>(i);
    return -1;
}

const SchemaOverrides::Entry* SchemaOverrides::find(const std::string& name) const {
    for (const auto& e : entries)
        if (e.name == name) return &e;
    return nullptr;
}

namespace {

bool parse_real(const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size()) return false;
    if (!std::isfinite(v)) return false;
    out = v;
    return true;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    bool quoted = false;
    for (size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    cells.push_back(cur);
    return cells;
}

std::string escape_csv_cell(const std::string& cell) {
    if (cell.find_first_of(",\"\n") == std::string::npos) return cell;
    std::string out = "\"";
    for (const char c : cell) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += "\"";
    return out;
}

// Canonical text for a real value; round-trips through strtod.
std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

std::pair<std::vector<std::string>, std::vector<std::vector<std::string>>>
read_csv_raw(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open CSV file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty CSV file: " + path);
    auto header = split_csv_line(line);
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw std::runtime_error("ragged CSV row " + std::to_string(rows.size() + 2) +
                                     " in " + path + ": expected " +
                                     std::to_string(header.size()) + " cells, got " +
                                     std::to_string(cells.size()));
        rows.push_back(std::move(cells));
    }
    return {std::move(header), std::move(rows)};
}

std::vector<ColumnSchema> infer_schema(
    const std::vector<std::string>& header,
    const std::vector<std::vector<std::string>>& raw_rows,
    const SchemaOverrides& overrides, size_t cardinality_threshold) {
    if (raw_rows.empty()) throw std::invalid_argument("infer_schema: no data rows");
    for (const auto& r : raw_rows)
        if (r.size() != header.size())
            throw std::invalid_argument("infer_schema: ragged rows");

    std::vector<ColumnSchema> schema;
    schema.reserve(header.size());
    for (size_t c = 0; c < header.size(); ++c) {
        if (header[c].empty())
            throw std::invalid_argument("infer_schema: empty column name at index " +
                                        std::to_string(c));
        ColumnSchema col;
        col.name = header[c];

        const auto* ov = overrides.find(col.name);
        if (ov && ov->role) col.role = ov->role;

        size_t non_null = 0;
        bool all_real = true;
        std::set<std::string> distinct;
        for (const auto& row : raw_rows) {
            const std::string& cell = row[c];
            if (cell.empty()) continue;
            ++non_null;
            distinct.insert(cell);
            double v;
            if (all_real && !parse_real(cell, v)) all_real = false;
        }
        if (non_null == 0)
            throw std::invalid_argument("infer_schema: column '" + col.name +
                                        "' has no non-null cells");

        ColumnKind kind;
        if (all_real && distinct.size() > cardinality_threshold) {
            kind = ColumnKind::Continuous;
        } else if (distinct.size() == 2) {
            kind = ColumnKind::Binary;
        } else if (distinct.size() >= 2) {
            kind = ColumnKind::Discrete;
        } else if (ov && ov->kind) {
            kind = *ov->kind;  // single-value column rescued by an override
        } else {
            throw std::invalid_argument("infer_schema: column '" + col.name +
                                        "' has a single distinct value; supply an override");
        }
        if (ov && ov->kind) kind = *ov->kind;
        col.kind = kind;

        if (kind != ColumnKind::Continuous) {
            if (ov && !ov->categories.empty()) {
                col.categories = ov->categories;
                for (const auto& d : distinct)
                    if (std::find(col.categories.begin(), col.categories.end(), d) ==
                        col.categories.end())
                        throw std::invalid_argument(
                            "infer_schema: value '" + d + "' in column '" + col.name +
                            "' missing from override category list");
            } else {
                col.categories.assign(distinct.begin(), distinct.end());
            }
            if (kind == ColumnKind::Binary && col.categories.size() != 2)
                throw std::invalid_argument("infer_schema: binary column '" + col.name +
                                            "' must have exactly 2 categories");
        }
        schema.push_back(std::move(col));
    }
    return schema;
}

Table load_csv(const std::string& path,
               const std::optional<std::vector<ColumnSchema>>& schema_in,
               const SchemaOverrides& overrides) {
    auto [header, raw_rows] = read_csv_raw(path);

    std::vector<ColumnSchema> schema;
    if (schema_in) {
        schema = *schema_in;
        if (schema.size() != header.size())
            throw std::runtime_error("load_csv: schema has " + std::to_string(schema.size()) +
                                     " columns but header has " + std::to_string(header.size()));
        for (size_t c = 0; c < schema.size(); ++c)
            if (schema[c].name != header[c])
                throw std::runtime_error("load_csv: header column '" + header[c] +
                                         "' does not match schema column '" + schema[c].name + "'");
    } else {
        schema = infer_schema(header, raw_rows, overrides);
    }

    Table table;
    table.schema = schema;
    table.rows.reserve(raw_rows.size());
    for (const auto& raw : raw_rows) {
        std::vector<Field> row;
        row.reserve(schema.size());
        for (size_t c = 0; c < schema.size(); ++c) {
            const std::string& cell = raw[c];
            if (cell.empty()) {
                row.push_back(Field::null());
                continue;
            }
            const auto& col = schema[c];
            if (col.kind == ColumnKind::Continuous) {
                double v;
                row.push_back(parse_real(cell, v) ? Field::real(v) : Field::null());
            } else {
                const auto it = std::find(col.categories.begin(), col.categories.end(), cell);
                row.push_back(it == col.categories.end()
                                  ? Field::null()
                                  : Field::category(static_cast<int>(it - col.categories.begin())));
            }
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

void write_csv(const Table& table, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write CSV file: " + path);
    for (size_t c = 0; c < table.schema.size(); ++c) {
        if (c) out << ',';
        out << escape_csv_cell(table.schema[c].name);
    }
    out << '\n';
    for (const auto& row : table.rows) {
        for (size_t c = 0; c < row.size(); ++c) {
            if (c) out << ',';
            const Field& f = row[c];
            if (f.is_null()) {
                // empty cell
            } else if (f.is_real()) {
                out << format_real(f.real_value());
            } else {
                out << escape_csv_cell(table.schema[c].categories.at(
                    static_cast<size_t>(f.category_index())));
            }
        }
        out << '\n';
    }
}

Table impute_nulls(const Table& table, uint64_t seed) {
    Rng rng(derive_seed(seed, "impute"));
    Table out = table;
    const size_t ncols = table.column_count();
    for (size_t c = 0; c < ncols; ++c) {
        const auto& col = table.schema[c];
        bool has_null = false;
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        size_t non_null = 0;
        for (const auto& row : table.rows) {
            if (row[c].is_null()) {
                has_null = true;
            } else {
                ++non_null;
                if (col.kind == ColumnKind::Continuous) {
                    lo = std::min(lo, row[c].real_value());
                    hi = std::max(hi, row[c].real_value());
                }
            }
        }
        if (!has_null) continue;
        if (non_null == 0)
            throw std::runtime_error("impute_nulls: column '" + col.name + "' is entirely null");
        for (auto& row : out.rows) {
            if (!row[c].is_null()) continue;
            if (col.kind == ColumnKind::Continuous) {
                row[c] = Field::real(rng.uniform(lo, hi));
            } else {
                row[c] = Field::category(
                    static_cast<int>(rng.uniform_int(col.categories.size())));
            }
        }
    }
    return out;
}

std::pair<Table, Table> split_train_holdout(const Table& table, double ratio,
                                            uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0))
        throw std::invalid_argument("split_train_holdout: ratio must be in (0,1)");
    if (table.row_count() < 2)
        throw std::invalid_argument("split_train_holdout: need at least 2 rows");
    Rng rng(derive_seed(seed, "split"));
    const auto perm = rng.permutation(table.row_count());
    const size_t n_train = static_cast<size_t>(
        std::floor(ratio * static_cast<double>(table.row_count())));
    Table train, holdout;
    train.schema = holdout.schema = table.schema;
    for (size_t i = 0; i < perm.size(); ++i)
        (i < n_train ? train : holdout).rows.push_back(table.rows[perm[i]]);
    return {std::move(train), std::move(holdout)};
}

// Override file format: one column per line,
//   name<TAB>kind<TAB>category,category,...<TAB>role
// with the last two fields optional.
SchemaOverrides load_schema_overrides(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open schema override file: " + path);
    SchemaOverrides ov;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::vector<std::string> parts;
        std::stringstream ss(line);
        std::string part;
        while (std::getline(ss, part, '\t')) parts.push_back(part);
        if (parts.empty()) continue;
        SchemaOverrides::Entry e;
        e.name = parts[0];
        if (parts.size() > 1 && !parts[1].empty())
            e.kind = column_kind_from_string(parts[1]);
        if (parts.size() > 2 && !parts[2].empty()) {
            std::stringstream cs(parts[2]);
            std::string cat;
            while (std::getline(cs, cat, ',')) e.categories.push_back(cat);
        }
        if (parts.size() > 3 && !parts[3].empty())
            e.role = parts[3] == "target" ? ColumnRole::Target : ColumnRole::Feature;
        ov.entries.push_back(std::move(e));
    }
    return ov;
}

void save_schema_overrides(const std::vector<ColumnSchema>& schema,
                           const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write schema override file: " + path);
    for (const auto& col : schema) {
        out << col.name << '\t' << to_string(col.kind) << '\t';
        for (size_t i = 0; i < col.categories.size(); ++i) {
            if (i) out << ',';
            out << col.categories[i];
        }
        out << '\t';
        if (col.role)
            out << (*col.role == ColumnRole::Target ? "target" : "feature");
        out << '\n';
    }
}

}  // namespace rcc
