#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tabrep/dataio.hpp"
#include "tabrep/errors.hpp"
#include "tabrep/matrix.hpp"
#include "tabrep/model_io.hpp"
#include "tabrep/rng.hpp"

namespace tabrep::embed {

using dataio::ColumnKind;
using dataio::TabularDataset;
using numkit::Matrix;
using numkit::RngStream;

/// Symmetric token co-occurrence counts. A token is one (column, level) pair,
/// spelled "column=level"; the context window is the whole record.
struct CooccurrenceMatrix {
    std::vector<std::string> vocabulary;
    Matrix counts; // V x V, symmetric, zero diagonal

    std::size_t size() const { return vocabulary.size(); }
};

inline std::string token_name(const std::string& column, const std::string& level) {
    return column + "=" + level;
}

/// Count unordered token pairs per record over the given rows.
inline CooccurrenceMatrix build_cooccurrence(const TabularDataset& ds, const std::vector<std::size_t>& rows) {
    const auto cat_idx = ds.schema.indices_of(ColumnKind::Categorical);
    if (cat_idx.empty()) throw DataError("build_cooccurrence: dataset has no categorical columns");

    CooccurrenceMatrix cooc;
    std::unordered_map<std::string, std::size_t> token_id;
    // token ids per (column, level code), assigned in column-major first-appearance order
    std::vector<std::vector<int>> ids(cat_idx.size());
    for (std::size_t k = 0; k < cat_idx.size(); ++k) ids[k].assign(ds.level_names[k].size(), -1);

    std::vector<std::vector<std::size_t>> record_tokens;
    record_tokens.reserve(rows.size());
    for (auto i : rows) {
        std::vector<std::size_t> toks;
        for (std::size_t k = 0; k < cat_idx.size(); ++k) {
            const int code = ds.categorical[k][i];
            if (code < 0) continue; // still missing
            if (ids[k][static_cast<std::size_t>(code)] < 0) {
                const std::string name =
                    token_name(ds.schema.columns[cat_idx[k]].name, ds.level_names[k][static_cast<std::size_t>(code)]);
                ids[k][static_cast<std::size_t>(code)] = static_cast<int>(cooc.vocabulary.size());
                token_id[name] = cooc.vocabulary.size();
                cooc.vocabulary.push_back(name);
            }
            toks.push_back(static_cast<std::size_t>(ids[k][static_cast<std::size_t>(code)]));
        }
        record_tokens.push_back(std::move(toks));
    }

    cooc.counts = Matrix(cooc.size(), cooc.size());
    for (const auto& toks : record_tokens)
        for (std::size_t a = 0; a < toks.size(); ++a)
            for (std::size_t b = a + 1; b < toks.size(); ++b) {
                cooc.counts(toks[a], toks[b]) += 1.0;
                cooc.counts(toks[b], toks[a]) += 1.0;
            }
    return cooc;
}

inline CooccurrenceMatrix build_cooccurrence(const TabularDataset& ds) {
    std::vector<std::size_t> all(ds.n());
    std::iota(all.begin(), all.end(), 0);
    return build_cooccurrence(ds, all);
}

/// Saturating count weight: (x/xmax)^alpha below xmax, 1 at and above it.
inline double glove_weight(double x, double xmax, double alpha) {
    if (!(xmax > 0.0)) throw ParamError("glove_weight: xmax must be > 0");
    if (x <= 0.0) return 0.0;
    if (x >= xmax) return 1.0;
    return std::pow(x / xmax, alpha);
}

struct GloveConfig {
    double lr = 0.05;
    std::size_t epochs = 50;
    double xmax = 100.0;
    double alpha = 0.75;
    std::uint64_t seed = 0;
};

struct EmbeddingTable {
    std::size_t dim = 0;
    std::vector<std::string> tokens;
    Matrix main;    // V x d
    Matrix context; // V x d
    std::vector<double> bias_main, bias_context;
    std::vector<double> loss_history; // per-epoch mean weighted loss

    /// The vector actually used downstream: w + w~.
    Matrix combined() const {
        Matrix out = main;
        for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += context.data()[i];
        return out;
    }
};

/// Fit token vectors so w_i . w~_j + b_i + b~_j tracks log X_ij, with
/// per-coordinate AdaGrad steps over the nonzero cells.
inline EmbeddingTable train_glove(const CooccurrenceMatrix& cooc, std::size_t dim, const GloveConfig& cfg) {
    if (dim < 1) throw ParamError("train_glove: dim must be >= 1");
    std::vector<std::pair<std::size_t, std::size_t>> cells;
    for (std::size_t i = 0; i < cooc.size(); ++i)
        for (std::size_t j = 0; j < cooc.size(); ++j)
            if (cooc.counts(i, j) > 0.0) cells.emplace_back(i, j);
    if (cells.empty()) throw DataError("train_glove: co-occurrence counts are all zero");

    const std::size_t v = cooc.size();
    EmbeddingTable table;
    table.dim = dim;
    table.tokens = cooc.vocabulary;
    table.bias_main.assign(v, 0.0);
    table.bias_context.assign(v, 0.0);

    RngStream rng(cfg.seed);
    const double init = 0.5 / static_cast<double>(dim);
    table.main = numkit::sample(rng, numkit::Uniform{-init, init}, v, dim);
    table.context = numkit::sample(rng, numkit::Uniform{-init, init}, v, dim);

    Matrix acc_main(v, dim, 1.0), acc_context(v, dim, 1.0);
    std::vector<double> acc_bm(v, 1.0), acc_bc(v, 1.0);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(cells);
        double loss_sum = 0.0;
        for (const auto& [i, j] : cells) {
            const double x = cooc.counts(i, j);
            const double f = glove_weight(x, cfg.xmax, cfg.alpha);
            double dot = table.bias_main[i] + table.bias_context[j];
            for (std::size_t t = 0; t < dim; ++t) dot += table.main(i, t) * table.context(j, t);
            const double diff = dot - std::log(x);
            loss_sum += f * diff * diff;
            const double g = 2.0 * f * diff;
            for (std::size_t t = 0; t < dim; ++t) {
                const double gm = g * table.context(j, t);
                const double gc = g * table.main(i, t);
                table.main(i, t) -= cfg.lr * gm / std::sqrt(acc_main(i, t));
                table.context(j, t) -= cfg.lr * gc / std::sqrt(acc_context(j, t));
                acc_main(i, t) += gm * gm;
                acc_context(j, t) += gc * gc;
            }
            table.bias_main[i] -= cfg.lr * g / std::sqrt(acc_bm[i]);
            table.bias_context[j] -= cfg.lr * g / std::sqrt(acc_bc[j]);
            acc_bm[i] += g * g;
            acc_bc[j] += g * g;
        }
        table.loss_history.push_back(loss_sum / static_cast<double>(cells.size()));
    }
    return table;
}

/// Numeric block with each categorical column replaced by its d-dimensional
/// token vector. Tokens absent from the table map to the zero vector.
inline Matrix embed_dataset(const TabularDataset& ds, const EmbeddingTable& table) {
    const auto cat_idx = ds.schema.indices_of(ColumnKind::Categorical);
    if (cat_idx.empty()) return ds.numeric;

    std::unordered_map<std::string, std::size_t> token_row;
    for (std::size_t t = 0; t < table.tokens.size(); ++t) token_row[table.tokens[t]] = t;
    const Matrix vectors = table.combined();

    // per-column code -> table row (-1 for unknown), resolved by name once
    std::vector<std::vector<int>> rows_of(cat_idx.size());
    for (std::size_t k = 0; k < cat_idx.size(); ++k) {
        rows_of[k].assign(ds.level_names[k].size(), -1);
        for (std::size_t code = 0; code < ds.level_names[k].size(); ++code) {
            auto it = token_row.find(token_name(ds.schema.columns[cat_idx[k]].name, ds.level_names[k][code]));
            if (it != token_row.end()) rows_of[k][code] = static_cast<int>(it->second);
        }
    }

    const std::size_t d = table.dim;
    Matrix out(ds.n(), ds.numeric_cols() + d * cat_idx.size());
    for (std::size_t i = 0; i < ds.n(); ++i) {
        for (std::size_t j = 0; j < ds.numeric_cols(); ++j) out(i, j) = ds.numeric(i, j);
        for (std::size_t k = 0; k < cat_idx.size(); ++k) {
            const int code = ds.categorical[k][i];
            const int row = code >= 0 ? rows_of[k][static_cast<std::size_t>(code)] : -1;
            if (row < 0) continue; // unknown level: zero vector
            for (std::size_t t = 0; t < d; ++t)
                out(i, ds.numeric_cols() + k * d + t) = vectors(static_cast<std::size_t>(row), t);
        }
    }
    return out;
}

inline void save_embedding(const EmbeddingTable& table, const std::string& path) {
    dataio::ModelContainer c;
    c.put("format", std::string("embedding-table"));
    c.put("dim", static_cast<std::int64_t>(table.dim));
    std::string toks;
    for (std::size_t i = 0; i < table.tokens.size(); ++i) {
        if (i) toks += '\n';
        toks += table.tokens[i];
    }
    c.put("tokens", toks);
    c.put("main", table.main);
    c.put("context", table.context);
    auto as_row = [](const std::vector<double>& v) {
        Matrix m(1, v.size());
        for (std::size_t i = 0; i < v.size(); ++i) m(0, i) = v[i];
        return m;
    };
    c.put("bias_main", as_row(table.bias_main));
    c.put("bias_context", as_row(table.bias_context));
    c.put("loss_history", as_row(table.loss_history));
    dataio::save_container(c, path);
}

inline EmbeddingTable load_embedding(const std::string& path) {
    auto c = dataio::load_container(path);
    if (!c.has("format") || c.get_string("format") != "embedding-table")
        throw FormatError("'" + path + "': not an embedding table container");
    EmbeddingTable t;
    t.dim = static_cast<std::size_t>(c.get_i64("dim"));
    const std::string& toks = c.get_string("tokens");
    std::size_t start = 0;
    while (start <= toks.size() && !toks.empty()) {
        const std::size_t nl = toks.find('\n', start);
        t.tokens.push_back(toks.substr(start, nl == std::string::npos ? std::string::npos : nl - start));
        if (nl == std::string::npos) break;
        start = nl + 1;
    }
    t.main = c.get_matrix("main");
    t.context = c.get_matrix("context");
    auto as_vec = [&](const std::string& name) {
        const Matrix& m = c.get_matrix(name);
        return std::vector<double>(m.data().begin(), m.data().end());
    };
    t.bias_main = as_vec("bias_main");
    t.bias_context = as_vec("bias_context");
    t.loss_history = as_vec("loss_history");
    return t;
}

} // namespace tabrep::embed
