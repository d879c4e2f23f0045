#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "tabrep/dataio.hpp"
#include "tabrep/errors.hpp"
#include "tabrep/matrix.hpp"
#include "tabrep/rng.hpp"

namespace tabrep::preprocess {

using dataio::ColumnKind;
using dataio::TabularDataset;
using numkit::Matrix;

// ---------------------------------------------------------------------------
// Imputation: numeric -> median of fitted rows, categorical -> mode.
// Statistics are fitted on a row subset so folds never see their held-out rows.
// ---------------------------------------------------------------------------

struct ImputeStats {
    std::vector<double> numeric_median; // per numeric column
    std::vector<int> categorical_mode;  // per categorical column
};

inline ImputeStats fit_impute(const TabularDataset& ds, const std::vector<std::size_t>& rows) {
    if (rows.empty()) throw ParamError("fit_impute: empty row set");
    const auto num_idx = ds.schema.indices_of(ColumnKind::Numeric);
    const auto cat_idx = ds.schema.indices_of(ColumnKind::Categorical);
    ImputeStats st;
    std::vector<std::string> unusable;

    for (std::size_t k = 0; k < num_idx.size(); ++k) {
        std::vector<double> vals;
        for (auto i : rows)
            if (!ds.missing[num_idx[k]][i]) vals.push_back(ds.numeric(i, k));
        if (vals.empty()) {
            unusable.push_back(ds.schema.columns[num_idx[k]].name);
            st.numeric_median.push_back(0.0);
            continue;
        }
        std::sort(vals.begin(), vals.end());
        const std::size_t m = vals.size();
        st.numeric_median.push_back(m % 2 ? vals[m / 2] : 0.5 * (vals[m / 2 - 1] + vals[m / 2]));
    }

    for (std::size_t k = 0; k < cat_idx.size(); ++k) {
        std::vector<std::size_t> counts(ds.level_names[k].size(), 0);
        std::size_t seen = 0;
        for (auto i : rows) {
            if (ds.missing[cat_idx[k]][i]) continue;
            ++counts[static_cast<std::size_t>(ds.categorical[k][i])];
            ++seen;
        }
        if (seen == 0) {
            unusable.push_back(ds.schema.columns[cat_idx[k]].name);
            st.categorical_mode.push_back(0);
            continue;
        }
        // ties break toward the lowest code (first-appearance order)
        std::size_t best = 0;
        for (std::size_t c = 1; c < counts.size(); ++c)
            if (counts[c] > counts[best]) best = c;
        st.categorical_mode.push_back(static_cast<int>(best));
    }

    if (!unusable.empty()) {
        std::string msg = "fit_impute: fully-missing column(s):";
        for (const auto& n : unusable) msg += " '" + n + "'";
        throw DataError(msg);
    }
    return st;
}

/// Fill masked feature cells and clear their mask bits. Target cells are left
/// untouched (a masked target is a data error surfaced by the harness).
inline TabularDataset apply_impute(const TabularDataset& ds, const ImputeStats& st) {
    const auto num_idx = ds.schema.indices_of(ColumnKind::Numeric);
    const auto cat_idx = ds.schema.indices_of(ColumnKind::Categorical);
    TabularDataset out = ds;
    for (std::size_t k = 0; k < num_idx.size(); ++k)
        for (std::size_t i = 0; i < out.n(); ++i)
            if (out.missing[num_idx[k]][i]) {
                out.numeric(i, k) = st.numeric_median[k];
                out.missing[num_idx[k]][i] = 0;
            }
    for (std::size_t k = 0; k < cat_idx.size(); ++k)
        for (std::size_t i = 0; i < out.n(); ++i)
            if (out.missing[cat_idx[k]][i]) {
                out.categorical[k][i] = st.categorical_mode[k];
                out.missing[cat_idx[k]][i] = 0;
            }
    return out;
}

inline TabularDataset impute(const TabularDataset& ds) {
    std::vector<std::size_t> all(ds.n());
    std::iota(all.begin(), all.end(), 0);
    return apply_impute(ds, fit_impute(ds, all));
}

// ---------------------------------------------------------------------------
// Outlier winsorization at |z| > zmax.
// ---------------------------------------------------------------------------

struct ClipStats {
    std::vector<double> mean, sd; // per numeric column (population sd)
    double zmax = 4.0;
};

namespace detail {

inline void column_moments(const Matrix& m, const std::vector<std::size_t>& rows, std::size_t col,
                           double& mean, double& sd) {
    double s = 0.0;
    for (auto i : rows) s += m(i, col);
    mean = s / static_cast<double>(rows.size());
    double ss = 0.0;
    for (auto i : rows) {
        const double d = m(i, col) - mean;
        ss += d * d;
    }
    sd = std::sqrt(ss / static_cast<double>(rows.size()));
}

} // namespace detail

inline ClipStats fit_clip(const TabularDataset& ds, const std::vector<std::size_t>& rows, double zmax) {
    if (!(zmax > 0.0)) throw ParamError("clip_outliers: zmax must be > 0");
    if (rows.empty()) throw ParamError("fit_clip: empty row set");
    ClipStats st;
    st.zmax = zmax;
    st.mean.resize(ds.numeric_cols());
    st.sd.resize(ds.numeric_cols());
    for (std::size_t j = 0; j < ds.numeric_cols(); ++j)
        detail::column_moments(ds.numeric, rows, j, st.mean[j], st.sd[j]);
    return st;
}

inline TabularDataset apply_clip(const TabularDataset& ds, const ClipStats& st) {
    TabularDataset out = ds;
    for (std::size_t j = 0; j < out.numeric_cols(); ++j) {
        if (st.sd[j] == 0.0) continue; // no scale, nothing to winsorize against
        const double lo = st.mean[j] - st.zmax * st.sd[j];
        const double hi = st.mean[j] + st.zmax * st.sd[j];
        for (std::size_t i = 0; i < out.n(); ++i)
            out.numeric(i, j) = std::clamp(out.numeric(i, j), lo, hi);
    }
    return out;
}

inline TabularDataset clip_outliers(const TabularDataset& ds, double zmax) {
    std::vector<std::size_t> all(ds.n());
    std::iota(all.begin(), all.end(), 0);
    return apply_clip(ds, fit_clip(ds, all, zmax));
}

// ---------------------------------------------------------------------------
// Standardization to zero mean / unit (population) sd per column.
// ---------------------------------------------------------------------------

struct StandardizeStats {
    std::vector<double> mean, sd;
    std::vector<std::uint8_t> constant; // sd == 0 columns map to 0
};

inline StandardizeStats fit_standardize(const Matrix& x, const std::vector<std::size_t>& rows) {
    if (rows.empty()) throw ParamError("fit_standardize: empty row set");
    StandardizeStats st;
    st.mean.resize(x.cols());
    st.sd.resize(x.cols());
    st.constant.resize(x.cols());
    for (std::size_t j = 0; j < x.cols(); ++j) {
        detail::column_moments(x, rows, j, st.mean[j], st.sd[j]);
        st.constant[j] = st.sd[j] == 0.0;
    }
    return st;
}

inline Matrix apply_standardize(const Matrix& x, const StandardizeStats& st) {
    if (x.cols() != st.mean.size())
        throw ShapeError("apply_standardize: stats cover " + std::to_string(st.mean.size()) +
                         " columns, matrix has " + std::to_string(x.cols()));
    Matrix out = x;
    for (std::size_t i = 0; i < out.rows(); ++i)
        for (std::size_t j = 0; j < out.cols(); ++j)
            out(i, j) = st.constant[j] ? 0.0 : (out(i, j) - st.mean[j]) / st.sd[j];
    return out;
}

inline Matrix invert_standardize(const Matrix& x, const StandardizeStats& st) {
    if (x.cols() != st.mean.size())
        throw ShapeError("invert_standardize: stats cover " + std::to_string(st.mean.size()) +
                         " columns, matrix has " + std::to_string(x.cols()));
    Matrix out = x;
    for (std::size_t i = 0; i < out.rows(); ++i)
        for (std::size_t j = 0; j < out.cols(); ++j)
            out(i, j) = st.constant[j] ? st.mean[j] : out(i, j) * st.sd[j] + st.mean[j];
    return out;
}

inline StandardizeStats fit_standardize(const TabularDataset& ds, const std::vector<std::size_t>& rows) {
    return fit_standardize(ds.numeric, rows);
}

inline TabularDataset apply_standardize(const TabularDataset& ds, const StandardizeStats& st) {
    TabularDataset out = ds;
    out.numeric = apply_standardize(ds.numeric, st);
    return out;
}

// ---------------------------------------------------------------------------
// Cross-validation folds. Records are shuffled once by seed and partitioned
// into k test folds; within each fold the remainder splits into validation
// (10% of all records) and train. For n=100, k=5: test 20 / val 10 / train 70.
// ---------------------------------------------------------------------------

struct Fold {
    std::vector<std::size_t> train, validation, test;
};

struct FoldPlan {
    std::size_t n = 0;
    std::size_t k = 0;
    std::uint64_t seed = 0;
    std::vector<Fold> folds;
};

inline FoldPlan make_folds(std::size_t n, std::size_t k, std::uint64_t seed) {
    if (k < 2) throw ParamError("make_folds: k must be >= 2");
    if (n < k) throw ParamError("make_folds: n=" + std::to_string(n) + " < k=" + std::to_string(k));

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    numkit::RngStream rng(seed);
    rng.shuffle(perm);

    FoldPlan plan;
    plan.n = n;
    plan.k = k;
    plan.seed = seed;

    const std::size_t base = n / k;
    const std::size_t extra = n % k; // first `extra` folds get one more test row
    const std::size_t val_n = n / 10;

    std::size_t start = 0;
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t size = base + (f < extra ? 1 : 0);
        Fold fold;
        fold.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(start),
                         perm.begin() + static_cast<std::ptrdiff_t>(start + size));
        std::vector<std::size_t> rest;
        rest.reserve(n - size);
        rest.insert(rest.end(), perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(start));
        rest.insert(rest.end(), perm.begin() + static_cast<std::ptrdiff_t>(start + size), perm.end());
        const std::size_t v = std::min(val_n, rest.size() > 0 ? rest.size() - 1 : 0);
        fold.validation.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(v));
        fold.train.assign(rest.begin() + static_cast<std::ptrdiff_t>(v), rest.end());
        plan.folds.push_back(std::move(fold));
        start += size;
    }
    return plan;
}

/// Plain-text manifest, one index list per line.
inline std::string fold_manifest(const FoldPlan& plan) {
    std::ostringstream out;
    out << "n " << plan.n << " k " << plan.k << " seed " << plan.seed << "\n";
    auto emit = [&](const char* tag, const std::vector<std::size_t>& v) {
        out << tag;
        for (auto i : v) out << ' ' << i;
        out << '\n';
    };
    for (std::size_t f = 0; f < plan.folds.size(); ++f) {
        out << "fold " << f << "\n";
        emit("test", plan.folds[f].test);
        emit("validation", plan.folds[f].validation);
        emit("train", plan.folds[f].train);
    }
    return out.str();
}

inline void save_fold_manifest(const FoldPlan& plan, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << fold_manifest(plan);
    if (!out) throw IoError("write failed for '" + path + "'");
}

} // namespace tabrep::preprocess
