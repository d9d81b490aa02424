#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mistfed/data.hpp"
#include "mistfed/errors.hpp"

namespace mistfed {

enum class ColumnRole { feature_numeric, feature_categorical, label, ignore };

inline ColumnRole column_role_from_string(const std::string& s) {
    if (s == "feature_numeric") return ColumnRole::feature_numeric;
    if (s == "feature_categorical") return ColumnRole::feature_categorical;
    if (s == "label") return ColumnRole::label;
    if (s == "ignore") return ColumnRole::ignore;
    throw ConfigError("unknown column role '" + s + "'");
}

/// Column-role mapping for CSV ingestion. Columns absent from the mapping
/// are ignored.
struct CsvSchema {
    std::map<std::string, ColumnRole> columns;

    static CsvSchema from_json(const nlohmann::json& j) {
        CsvSchema schema;
        if (!j.is_object() || !j.contains("columns") || !j["columns"].is_object()) {
            throw ConfigError("CSV schema must be an object with a 'columns' object");
        }
        for (const auto& [name, role] : j["columns"].items()) {
            if (!role.is_string()) {
                throw ConfigError("CSV schema: role of column '" + name + "' must be a string");
            }
            schema.columns[name] = column_role_from_string(role.get<std::string>());
        }
        return schema;
    }

    static CsvSchema from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw IngestionError("cannot open schema file '" + path + "'");
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("schema file '" + path + "' is not valid JSON: " + e.what());
        }
        return from_json(j);
    }
};

struct IngestStats {
    std::size_t rows_total = 0;        // data rows seen (header excluded)
    std::size_t rows_ingested = 0;
    std::size_t rows_invalid = 0;      // ingested with missing values (valid=false)
    std::size_t rows_unparseable = 0;  // skipped: wrong field count or missing label
    std::vector<std::size_t> unparseable_rows;  // 1-based file line numbers
    std::map<std::string, int> label_mapping;
    std::size_t feature_dim = 0;
    std::vector<std::string> feature_names;  // expanded (one-hot) order
};

struct CsvIngest {
    ModalityBlock block;
    std::vector<std::string> raw_labels;  // per ingested sample, pre-mapping
    IngestStats stats;
    std::size_t num_classes = 0;
};

namespace detail {

/// Minimal RFC-4180 field splitter (quotes, embedded commas, "" escapes).
inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(field);
            field.clear();
        } else if (c != '\r') {
            field += c;
        }
    }
    fields.push_back(field);
    return fields;
}

inline std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

inline std::optional<double> parse_double(const std::string& s) {
    const std::string t = trim(s);
    if (t.empty()) return std::nullopt;
    try {
        std::size_t consumed = 0;
        const double v = std::stod(t, &consumed);
        if (consumed != t.size() || !std::isfinite(v)) return std::nullopt;
        return v;
    } catch (...) {
        return std::nullopt;
    }
}

inline std::string lowercase(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

/// "normal"-like label values ("normal", "0", "benign") map to class 0;
/// the rest sort lexicographically into 1..C-1.
inline std::map<std::string, int> build_label_mapping(const std::set<std::string>& values) {
    std::map<std::string, int> mapping;
    std::vector<std::string> rest;
    std::string normal_key;
    for (const auto& v : values) {
        const std::string lower = lowercase(v);
        if (normal_key.empty() && (lower == "normal" || lower == "0" || lower == "benign")) {
            normal_key = v;
        } else {
            rest.push_back(v);
        }
    }
    if (normal_key.empty() && !rest.empty()) {
        normal_key = rest.front();
        rest.erase(rest.begin());
    }
    int next = 0;
    if (!normal_key.empty()) mapping[normal_key] = next++;
    for (const auto& v : rest) mapping[v] = next++;
    return mapping;
}

}  // namespace detail

/// Ingests one CSV file (first row header) as a single-modality block.
/// Numeric feature columns are min-max scaled to [0, 1] over the whole file;
/// categorical columns are one-hot encoded; rows with missing feature values
/// are kept but marked invalid; rows with a bad field count or missing label
/// are skipped, and more than max_unparseable_fraction of them fails the
/// ingestion.
inline CsvIngest load_csv(const std::string& path, const CsvSchema& schema,
                          ModalitySpec modality, double max_unparseable_fraction = 0.05) {
    std::ifstream in(path);
    if (!in) throw IngestionError("cannot open CSV file '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw IngestionError("CSV file '" + path + "' is empty");
    const auto header = detail::split_csv_line(line);

    std::vector<ColumnRole> roles(header.size(), ColumnRole::ignore);
    std::size_t label_col = header.size();
    for (std::size_t i = 0; i < header.size(); ++i) {
        const auto it = schema.columns.find(detail::trim(header[i]));
        if (it == schema.columns.end()) continue;
        roles[i] = it->second;
        if (it->second == ColumnRole::label) {
            if (label_col != header.size()) {
                throw IngestionError("CSV file '" + path + "' has multiple label columns");
            }
            label_col = i;
        }
    }
    if (label_col == header.size()) {
        throw IngestionError("CSV file '" + path + "' is missing a label column");
    }

    // pass 1: collect rows, column statistics and category/label universes
    struct Row {
        std::vector<std::string> fields;
        std::size_t line_number;
    };
    std::vector<Row> rows;
    IngestStats stats;
    std::size_t line_number = 1;
    while (std::getline(in, line)) {
        ++line_number;
        if (detail::trim(line).empty()) continue;
        ++stats.rows_total;
        auto fields = detail::split_csv_line(line);
        if (fields.size() != header.size() || detail::trim(fields[label_col]).empty()) {
            ++stats.rows_unparseable;
            stats.unparseable_rows.push_back(line_number);
            continue;
        }
        rows.push_back({std::move(fields), line_number});
    }
    if (stats.rows_total == 0) throw IngestionError("CSV file '" + path + "' has no data rows");
    if (static_cast<double>(stats.rows_unparseable) >
        max_unparseable_fraction * static_cast<double>(stats.rows_total)) {
        std::string lines;
        const std::size_t show = std::min<std::size_t>(stats.unparseable_rows.size(), 20);
        for (std::size_t i = 0; i < show; ++i) {
            lines += (i ? "," : "") + std::to_string(stats.unparseable_rows[i]);
        }
        throw IngestionError("CSV file '" + path + "': " +
                             std::to_string(stats.rows_unparseable) +
                             " unparseable rows exceed the threshold (lines " + lines + ")");
    }
    if (rows.empty()) throw IngestionError("CSV file '" + path + "' has no usable rows");

    std::vector<double> col_min(header.size(), 0.0), col_max(header.size(), 0.0);
    std::vector<bool> col_seen(header.size(), false);
    std::vector<std::set<std::string>> categories(header.size());
    std::set<std::string> label_values;
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (roles[i] == ColumnRole::feature_numeric) {
                if (const auto v = detail::parse_double(row.fields[i])) {
                    if (!col_seen[i]) {
                        col_min[i] = col_max[i] = *v;
                        col_seen[i] = true;
                    } else {
                        col_min[i] = std::min(col_min[i], *v);
                        col_max[i] = std::max(col_max[i], *v);
                    }
                }
            } else if (roles[i] == ColumnRole::feature_categorical) {
                const std::string v = detail::trim(row.fields[i]);
                if (!v.empty()) categories[i].insert(v);
            }
        }
        label_values.insert(detail::trim(row.fields[label_col]));
    }

    // expanded feature layout
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (roles[i] == ColumnRole::feature_numeric) {
            stats.feature_names.push_back(detail::trim(header[i]));
        } else if (roles[i] == ColumnRole::feature_categorical) {
            for (const auto& cat : categories[i]) {
                stats.feature_names.push_back(detail::trim(header[i]) + "=" + cat);
            }
        }
    }
    stats.feature_dim = stats.feature_names.size();
    if (stats.feature_dim == 0) {
        throw IngestionError("CSV file '" + path + "' has no feature columns in the schema");
    }

    stats.label_mapping = detail::build_label_mapping(label_values);

    // pass 2: materialize scaled samples
    CsvIngest result;
    modality.raw_dim = stats.feature_dim;
    result.block.modality = modality;
    for (const auto& row : rows) {
        RawSample sample;
        sample.x.reserve(stats.feature_dim);
        bool missing = false;
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (roles[i] == ColumnRole::feature_numeric) {
                const auto v = detail::parse_double(row.fields[i]);
                if (v && col_seen[i] && col_max[i] > col_min[i]) {
                    sample.x.push_back((*v - col_min[i]) / (col_max[i] - col_min[i]));
                } else if (v) {
                    sample.x.push_back(0.0);  // constant column
                } else {
                    sample.x.push_back(0.0);
                    missing = true;
                }
            } else if (roles[i] == ColumnRole::feature_categorical) {
                const std::string v = detail::trim(row.fields[i]);
                if (v.empty()) missing = true;
                for (const auto& cat : categories[i]) {
                    sample.x.push_back(v == cat ? 1.0 : 0.0);
                }
            }
        }
        const std::string label = detail::trim(row.fields[label_col]);
        sample.label = stats.label_mapping.at(label);
        sample.valid = !missing;
        if (missing) ++stats.rows_invalid;
        ++stats.rows_ingested;
        result.raw_labels.push_back(label);
        result.block.samples.push_back(std::move(sample));
    }

    result.stats = std::move(stats);
    result.num_classes = result.stats.label_mapping.size();
    return result;
}

}  // namespace mistfed
