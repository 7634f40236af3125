#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace rcc {

enum class ColumnKind { Continuous, Discrete, Binary };

enum class ColumnRole { Feature, Target };

const char* to_string(ColumnKind kind);
ColumnKind column_kind_from_string(const std::string& s);

struct ColumnSchema {
    std::string name;
    ColumnKind kind = ColumnKind::Continuous;
    // Category labels in a fixed, persisted order. Empty for continuous
    // columns. Encoding positions depend on this order.
    std::vector<std::string> categories;
    std::optional<ColumnRole> role;
};

// One cell of a table: a finite real, a category index, or null.
class Field {
public:
    static Field real(double v) { return Field(Tag::Real, v, -1); }
    static Field category(int idx) { return Field(Tag::Category, 0.0, idx); }
    static Field null() { return Field(Tag::Null, 0.0, -1); }

    bool is_null() const { return tag_ == Tag::Null; }
    bool is_real() const { return tag_ == Tag::Real; }
    bool is_category() const { return tag_ == Tag::Category; }

    double real_value() const;
    int category_index() const;

    bool operator==(const Field& other) const;

private:
    enum class Tag { Real, Category, Null };
    Field(Tag tag, double v, int idx) : tag_(tag), value_(v), index_(idx) {}

    Tag tag_;
    double value_;
    int index_;
};

// Immutable after construction; one Field per column per row.
struct Table {
    std::vector<ColumnSchema> schema;
    std::vector<std::vector<Field>> rows;

    size_t row_count() const { return rows.size(); }
    size_t column_count() const { return schema.size(); }
    int column_index(const std::string& name) const;  // -1 when absent
};

// Partial schema used to override inference: per-column kind and optional
// category order.
struct SchemaOverrides {
    struct Entry {
        std::string name;
        std::optional<ColumnKind> kind;
        std::vector<std::string> categories;  // empty = infer order
        std::optional<ColumnRole> role;
    };
    std::vector<Entry> entries;

    const Entry* find(const std::string& name) const;
};

// Columns whose cells all parse as finite reals and whose distinct-value
// count exceeds this threshold are treated as continuous.
inline constexpr size_t kDefaultCardinalityThreshold = 20;

std::vector<ColumnSchema> infer_schema(
    const std::vector<std::string>& header,
    const std::vector<std::vector<std::string>>& raw_rows,
    const SchemaOverrides& overrides = {},
    size_t cardinality_threshold = kDefaultCardinalityThreshold);

Table load_csv(const std::string& path,
               const std::optional<std::vector<ColumnSchema>>& schema = std::nullopt,
               const SchemaOverrides& overrides = {});

void write_csv(const Table& table, const std::string& path);

// Raw CSV reading (header + string cells), shared with inference.
std::pair<std::vector<std::string>, std::vector<std::vector<std::string>>>
read_csv_raw(const std::string& path);

Table impute_nulls(const Table& table, uint64_t seed);

std::pair<Table, Table> split_train_holdout(const Table& table, double ratio,
                                            uint64_t seed);

SchemaOverrides load_schema_overrides(const std::string& path);
void save_schema_overrides(const std::vector<ColumnSchema>& schema,
                           const std::string& path);

}  // namespace rcc
