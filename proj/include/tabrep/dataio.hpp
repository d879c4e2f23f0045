#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "tabrep/errors.hpp"
#include "tabrep/matrix.hpp"

namespace tabrep::dataio {

using numkit::Matrix;

enum class ColumnKind { Numeric, Categorical, Target };

struct ColumnSpec {
    std::string name;
    ColumnKind kind = ColumnKind::Numeric;
    std::vector<std::string> missing_tokens; // matched in addition to the empty cell
};

struct FeatureSchema {
    std::vector<ColumnSpec> columns;

    void validate() const {
        std::unordered_set<std::string> seen;
        std::size_t targets = 0;
        for (const auto& c : columns) {
            if (!seen.insert(c.name).second)
                throw SchemaError("schema: duplicate column name '" + c.name + "'");
            if (c.kind == ColumnKind::Target) ++targets;
        }
        if (targets != 1)
            throw SchemaError("schema: expected exactly one target column, found " + std::to_string(targets));
    }

    std::size_t target_index() const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i].kind == ColumnKind::Target) return i;
        throw SchemaError("schema: no target column");
    }

    std::vector<std::size_t> indices_of(ColumnKind kind) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i].kind == kind) out.push_back(i);
        return out;
    }
};

/// In-memory tabular dataset. The numeric block and categorical code columns
/// follow schema order within their kind; `missing` has one flag column per
/// schema column (including the target). Missing categorical cells carry
/// code -1 until imputation.
struct TabularDataset {
    FeatureSchema schema;
    Matrix numeric;                                    // n x #numeric
    std::vector<double> target;                        // n
    std::vector<std::vector<int>> categorical;         // per categorical column, n codes
    std::vector<std::vector<std::string>> level_names; // per categorical column, code -> level
    std::vector<std::vector<std::uint8_t>> missing;    // per schema column, n flags

    std::size_t n() const { return target.size(); }
    std::size_t numeric_cols() const { return numeric.cols(); }
    std::size_t categorical_cols() const { return categorical.size(); }

    bool any_missing() const {
        for (const auto& col : missing)
            for (auto m : col)
                if (m) return true;
        return false;
    }
};

namespace detail {

/// One RFC-4180 record; handles quoted fields, embedded quotes/commas/newlines.
inline std::optional<std::vector<std::string>> read_record(std::istream& in, std::size_t& line_no) {
    int c = in.get();
    if (c == EOF) return std::nullopt;
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    while (true) {
        if (c == EOF) {
            fields.push_back(std::move(field));
            break;
        }
        char ch = static_cast<char>(c);
        if (quoted) {
            if (ch == '"') {
                int peek = in.peek();
                if (peek == '"') {
                    field.push_back('"');
                    in.get();
                } else {
                    quoted = false;
                }
            } else {
                if (ch == '\n') ++line_no;
                field.push_back(ch);
            }
        } else if (ch == '"' && field.empty()) {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (ch == '\n') {
            if (!field.empty() && field.back() == '\r') field.pop_back();
            fields.push_back(std::move(field));
            ++line_no;
            break;
        } else {
            field.push_back(ch);
        }
        c = in.get();
    }
    return fields;
}

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline bool is_missing_token(const std::string& cell, const ColumnSpec& spec) {
    if (cell.empty()) return true;
    for (const auto& tok : spec.missing_tokens)
        if (cell == tok) return true;
    return false;
}

inline double parse_number(const std::string& cell, std::size_t line, const std::string& col) {
    double value = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last)
        throw ParseError("line " + std::to_string(line) + ", column '" + col + "': cannot parse '" + cell +
                         "' as a number");
    return value;
}

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += "\"";
    return out;
}

} // namespace detail

/// Header row of a CSV file (used to materialize schemas declared as "rest").
inline std::vector<std::string> read_csv_header(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::size_t line_no = 1;
    auto header = detail::read_record(in, line_no);
    if (!header) throw ParseError("'" + path + "': empty file");
    for (auto& h : *header) h = detail::trim(h);
    return *header;
}

/// Load a CSV file against a declared schema. The header row must contain
/// every schema column (order free, extra file columns ignored); categorical
/// levels are coded in first-appearance order; missing markers set the mask.
inline TabularDataset load_csv(const std::string& path, const FeatureSchema& schema) {
    schema.validate();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");

    std::size_t line_no = 1;
    auto header = detail::read_record(in, line_no);
    if (!header) throw ParseError("'" + path + "': empty file");
    for (auto& h : *header) h = detail::trim(h);

    // map schema columns onto file columns
    std::vector<std::size_t> file_pos(schema.columns.size());
    {
        std::unordered_map<std::string, std::size_t> by_name;
        for (std::size_t i = 0; i < header->size(); ++i) by_name[(*header)[i]] = i;
        for (std::size_t s = 0; s < schema.columns.size(); ++s) {
            auto it = by_name.find(schema.columns[s].name);
            if (it == by_name.end())
                throw SchemaError("'" + path + "': header is missing schema column '" + schema.columns[s].name + "'");
            file_pos[s] = it->second;
        }
    }

    const auto num_idx = schema.indices_of(ColumnKind::Numeric);
    const auto cat_idx = schema.indices_of(ColumnKind::Categorical);
    const std::size_t target_idx = schema.target_index();

    std::vector<std::vector<double>> numeric_rows;
    TabularDataset ds;
    ds.schema = schema;
    ds.categorical.resize(cat_idx.size());
    ds.level_names.resize(cat_idx.size());
    ds.missing.resize(schema.columns.size());
    std::vector<std::unordered_map<std::string, int>> level_codes(cat_idx.size());

    while (auto rec = detail::read_record(in, line_no)) {
        if (rec->size() == 1 && (*rec)[0].empty()) continue; // trailing blank line
        const std::size_t row_line = line_no; // read_record already advanced past this row
        if (rec->size() != header->size())
            throw ParseError("line " + std::to_string(row_line - 1) + ": expected " +
                             std::to_string(header->size()) + " fields, got " + std::to_string(rec->size()));

        std::vector<double> numrow(num_idx.size(), 0.0);
        for (std::size_t k = 0; k < num_idx.size(); ++k) {
            const auto& spec = schema.columns[num_idx[k]];
            const std::string cell = detail::trim((*rec)[file_pos[num_idx[k]]]);
            if (detail::is_missing_token(cell, spec)) {
                ds.missing[num_idx[k]].push_back(1);
            } else {
                numrow[k] = detail::parse_number(cell, row_line - 1, spec.name);
                ds.missing[num_idx[k]].push_back(0);
            }
        }
        numeric_rows.push_back(std::move(numrow));

        for (std::size_t k = 0; k < cat_idx.size(); ++k) {
            const auto& spec = schema.columns[cat_idx[k]];
            const std::string cell = detail::trim((*rec)[file_pos[cat_idx[k]]]);
            if (detail::is_missing_token(cell, spec)) {
                ds.categorical[k].push_back(-1);
                ds.missing[cat_idx[k]].push_back(1);
            } else {
                auto [it, inserted] = level_codes[k].try_emplace(cell, static_cast<int>(ds.level_names[k].size()));
                if (inserted) ds.level_names[k].push_back(cell);
                ds.categorical[k].push_back(it->second);
                ds.missing[cat_idx[k]].push_back(0);
            }
        }

        {
            const auto& spec = schema.columns[target_idx];
            const std::string cell = detail::trim((*rec)[file_pos[target_idx]]);
            if (detail::is_missing_token(cell, spec)) {
                ds.target.push_back(0.0);
                ds.missing[target_idx].push_back(1);
            } else {
                ds.target.push_back(detail::parse_number(cell, row_line - 1, spec.name));
                ds.missing[target_idx].push_back(0);
            }
        }
    }

    ds.numeric = Matrix(numeric_rows.size(), num_idx.size());
    for (std::size_t i = 0; i < numeric_rows.size(); ++i)
        for (std::size_t j = 0; j < num_idx.size(); ++j) ds.numeric(i, j) = numeric_rows[i][j];
    return ds;
}

/// Write a dataset back out as CSV (schema column order, full precision).
/// Missing cells become empty fields.
inline void save_csv(const TabularDataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");

    const auto num_idx = ds.schema.indices_of(ColumnKind::Numeric);
    const auto cat_idx = ds.schema.indices_of(ColumnKind::Categorical);

    for (std::size_t c = 0; c < ds.schema.columns.size(); ++c) {
        if (c) out << ',';
        out << detail::csv_escape(ds.schema.columns[c].name);
    }
    out << '\n';

    char buf[32];
    auto fmt = [&](double v) {
        int len = std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf, static_cast<std::size_t>(len));
    };

    for (std::size_t i = 0; i < ds.n(); ++i) {
        for (std::size_t c = 0; c < ds.schema.columns.size(); ++c) {
            if (c) out << ',';
            if (ds.missing[c][i]) continue;
            const auto& spec = ds.schema.columns[c];
            if (spec.kind == ColumnKind::Numeric) {
                auto k = static_cast<std::size_t>(
                    std::find(num_idx.begin(), num_idx.end(), c) - num_idx.begin());
                out << fmt(ds.numeric(i, k));
            } else if (spec.kind == ColumnKind::Categorical) {
                auto k = static_cast<std::size_t>(
                    std::find(cat_idx.begin(), cat_idx.end(), c) - cat_idx.begin());
                out << detail::csv_escape(ds.level_names[k][static_cast<std::size_t>(ds.categorical[k][i])]);
            } else {
                out << fmt(ds.target[i]);
            }
        }
        out << '\n';
    }
    if (!out) throw IoError("write failed for '" + path + "'");
}

/// Row subset (same schema/levels, rows in index order).
inline TabularDataset take_rows(const TabularDataset& ds, const std::vector<std::size_t>& idx) {
    TabularDataset out;
    out.schema = ds.schema;
    out.level_names = ds.level_names;
    out.numeric = numkit::take_rows(ds.numeric, idx);
    out.target.reserve(idx.size());
    for (auto i : idx) out.target.push_back(ds.target[i]);
    out.categorical.resize(ds.categorical.size());
    for (std::size_t k = 0; k < ds.categorical.size(); ++k) {
        out.categorical[k].reserve(idx.size());
        for (auto i : idx) out.categorical[k].push_back(ds.categorical[k][i]);
    }
    out.missing.resize(ds.missing.size());
    for (std::size_t c = 0; c < ds.missing.size(); ++c) {
        out.missing[c].reserve(idx.size());
        for (auto i : idx) out.missing[c].push_back(ds.missing[c][i]);
    }
    return out;
}

} // namespace tabrep::dataio
