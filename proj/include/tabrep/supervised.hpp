#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "tabrep/errors.hpp"
#include "tabrep/matrix.hpp"
#include "tabrep/rng.hpp"

namespace tabrep::supervised {

using numkit::Matrix;
using numkit::RngStream;

inline double rmse(const std::vector<double>& y, const std::vector<double>& yhat) {
    if (y.empty() || y.size() != yhat.size())
        throw ParamError("rmse: need equal-length non-empty vectors, got " + std::to_string(y.size()) + " and " +
                         std::to_string(yhat.size()));
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double d = y[i] - yhat[i];
        s += d * d;
    }
    return std::sqrt(s / static_cast<double>(y.size()));
}

inline double soft_threshold(double z, double lambda) {
    if (lambda < 0.0) throw ParamError("soft_threshold: lambda must be >= 0");
    if (z > lambda) return z - lambda;
    if (z < -lambda) return z + lambda;
    return 0.0;
}

// ---------------------------------------------------------------------------
// Lasso by cyclic coordinate descent on (1/2n)||y - Xw - b||^2 + lambda*||w||_1,
// intercept unpenalized.
// ---------------------------------------------------------------------------

struct LinearModel {
    std::vector<double> weights;
    double intercept = 0.0;
    double lambda = 0.0;
    bool converged = true;
    std::size_t iterations = 0;
};

inline LinearModel train_lasso(const Matrix& x, const std::vector<double>& y, double lambda, double tol = 1e-7,
                               std::size_t max_iter = 10000) {
    if (lambda < 0.0) throw ParamError("train_lasso: lambda must be >= 0");
    if (x.rows() != y.size() || x.rows() == 0)
        throw ShapeError("train_lasso: X has " + std::to_string(x.rows()) + " rows, y has " +
                         std::to_string(y.size()));
    const std::size_t n = x.rows(), p = x.cols();
    const double inv_n = 1.0 / static_cast<double>(n);

    LinearModel model;
    model.lambda = lambda;
    model.weights.assign(p, 0.0);
    model.intercept = std::accumulate(y.begin(), y.end(), 0.0) * inv_n;

    std::vector<double> residual(n);
    for (std::size_t i = 0; i < n; ++i) residual[i] = y[i] - model.intercept;

    std::vector<double> col_sq(p, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j) col_sq[j] += x(i, j) * x(i, j) * inv_n;

    model.converged = false;
    for (std::size_t it = 0; it < max_iter; ++it) {
        double max_change = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            if (col_sq[j] == 0.0) continue;
            double rho = col_sq[j] * model.weights[j];
            for (std::size_t i = 0; i < n; ++i) rho += x(i, j) * residual[i] * inv_n;
            const double w_new = soft_threshold(rho, lambda) / col_sq[j];
            const double delta = w_new - model.weights[j];
            if (delta != 0.0) {
                for (std::size_t i = 0; i < n; ++i) residual[i] -= x(i, j) * delta;
                model.weights[j] = w_new;
                max_change = std::max(max_change, std::abs(delta));
            }
        }
        const double db = std::accumulate(residual.begin(), residual.end(), 0.0) * inv_n;
        if (db != 0.0) {
            model.intercept += db;
            for (double& r : residual) r -= db;
            max_change = std::max(max_change, std::abs(db));
        }
        model.iterations = it + 1;
        if (max_change < tol) {
            model.converged = true;
            break;
        }
    }
    return model;
}

// ---------------------------------------------------------------------------
// Random forest regression: bootstrap per tree, best variance-reducing split
// among m_try features, leaf = mean. Ties break toward the lowest feature
// index then the lowest threshold so fits are reproducible.
// ---------------------------------------------------------------------------

struct RfConfig {
    std::size_t n_trees = 200;
    std::size_t m_try = 0; // 0 -> floor(p/3), at least 1
    std::size_t min_leaf = 5;
    std::size_t max_depth = 100;
    std::uint64_t seed = 0;
};

struct TreeNode {
    int feature = -1; // -1 marks a leaf
    double threshold = 0.0;
    int left = -1, right = -1;
    double value = 0.0;
};

struct Tree {
    std::vector<TreeNode> nodes;
    std::vector<std::uint8_t> in_bag; // per training row, used for OOB checks
};

struct RfModel {
    std::vector<Tree> trees;
    RfConfig config;
    std::size_t n_features = 0;
};

namespace detail {

struct TreeBuilder {
    const Matrix& x;
    const std::vector<double>& y;
    const RfConfig& cfg;
    std::size_t m_try;
    RngStream& rng;
    Tree& tree;
    std::vector<std::size_t> feature_pool;
    std::vector<std::pair<double, double>> scratch; // (feature value, target)

    int build(std::vector<std::size_t>& rows, std::size_t depth) {
        double sum = 0.0, sum2 = 0.0;
        for (auto r : rows) {
            sum += y[r];
            sum2 += y[r] * y[r];
        }
        const double n_node = static_cast<double>(rows.size());
        const double node_sse = sum2 - sum * sum / n_node;

        const int id = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back({});
        tree.nodes[id].value = sum / n_node;

        if (depth >= cfg.max_depth || rows.size() < 2 * cfg.min_leaf || node_sse <= 0.0) return id;

        // m_try distinct features, scanned in ascending index order
        for (std::size_t k = 0; k < m_try; ++k) {
            const std::size_t j = k + rng.next_below(feature_pool.size() - k);
            std::swap(feature_pool[k], feature_pool[j]);
        }
        std::vector<std::size_t> candidates(feature_pool.begin(),
                                            feature_pool.begin() + static_cast<std::ptrdiff_t>(m_try));
        std::sort(candidates.begin(), candidates.end());

        double best_gain = 0.0, best_threshold = 0.0;
        int best_feature = -1;
        std::size_t best_left_count = 0;

        for (auto f : candidates) {
            scratch.clear();
            for (auto r : rows) scratch.emplace_back(x(r, f), y[r]);
            std::sort(scratch.begin(), scratch.end());
            double lsum = 0.0, lsum2 = 0.0;
            for (std::size_t i = 0; i + 1 < scratch.size(); ++i) {
                lsum += scratch[i].second;
                lsum2 += scratch[i].second * scratch[i].second;
                const std::size_t nl = i + 1, nr = scratch.size() - nl;
                if (nl < cfg.min_leaf || nr < cfg.min_leaf) continue;
                if (scratch[i].first == scratch[i + 1].first) continue;
                const double rsum = sum - lsum, rsum2 = sum2 - lsum2;
                const double sse = (lsum2 - lsum * lsum / static_cast<double>(nl)) +
                                   (rsum2 - rsum * rsum / static_cast<double>(nr));
                const double gain = node_sse - sse;
                if (gain > best_gain) {
                    best_gain = gain;
                    best_feature = static_cast<int>(f);
                    best_threshold = 0.5 * (scratch[i].first + scratch[i + 1].first);
                    best_left_count = nl;
                }
            }
        }

        if (best_feature < 0) return id;

        std::vector<std::size_t> left, right;
        left.reserve(best_left_count);
        right.reserve(rows.size() - best_left_count);
        for (auto r : rows)
            (x(r, static_cast<std::size_t>(best_feature)) <= best_threshold ? left : right).push_back(r);
        rows.clear();
        rows.shrink_to_fit();

        tree.nodes[id].feature = best_feature;
        tree.nodes[id].threshold = best_threshold;
        const int l = build(left, depth + 1);
        tree.nodes[id].left = l;
        const int r = build(right, depth + 1);
        tree.nodes[id].right = r;
        return id;
    }
};

inline double tree_predict(const Tree& tree, const Matrix& x, std::size_t row) {
    int node = 0;
    while (tree.nodes[static_cast<std::size_t>(node)].feature >= 0) {
        const auto& nd = tree.nodes[static_cast<std::size_t>(node)];
        node = x(row, static_cast<std::size_t>(nd.feature)) <= nd.threshold ? nd.left : nd.right;
    }
    return tree.nodes[static_cast<std::size_t>(node)].value;
}

} // namespace detail

inline RfModel train_random_forest(const Matrix& x, const std::vector<double>& y, const RfConfig& cfg) {
    if (x.rows() != y.size() || x.rows() < 2)
        throw ParamError("train_random_forest: need n >= 2 matching rows");
    if (cfg.n_trees == 0) throw ParamError("train_random_forest: n_trees must be >= 1");
    const std::size_t n = x.rows(), p = x.cols();

    RfModel model;
    model.config = cfg;
    model.config.m_try = cfg.m_try ? std::min(cfg.m_try, p) : std::max<std::size_t>(1, p / 3);
    model.n_features = p;

    RngStream master(cfg.seed);
    for (std::size_t t = 0; t < cfg.n_trees; ++t) {
        RngStream rng = master.derive(t);
        Tree tree;
        tree.in_bag.assign(n, 0);
        std::vector<std::size_t> rows(n);
        for (auto& r : rows) {
            r = static_cast<std::size_t>(rng.next_below(n));
            tree.in_bag[r] = 1;
        }
        detail::TreeBuilder builder{x, y, model.config, model.config.m_try, rng, tree, {}, {}};
        builder.feature_pool.resize(p);
        std::iota(builder.feature_pool.begin(), builder.feature_pool.end(), 0);
        builder.build(rows, 0);
        model.trees.push_back(std::move(tree));
    }
    return model;
}

inline std::vector<double> predict(const RfModel& model, const Matrix& x) {
    if (x.cols() != model.n_features)
        throw ShapeError("predict: forest expects " + std::to_string(model.n_features) + " features, got " +
                         std::to_string(x.cols()));
    std::vector<double> out(x.rows(), 0.0);
    for (const auto& tree : model.trees)
        for (std::size_t i = 0; i < x.rows(); ++i) out[i] += detail::tree_predict(tree, x, i);
    for (double& v : out) v /= static_cast<double>(model.trees.size());
    return out;
}

/// Out-of-bag predictions over the training matrix; rows never left out by
/// any tree yield NaN. Trees that saw a row in their bootstrap do not vote.
inline std::vector<double> oob_predict(const RfModel& model, const Matrix& x_train) {
    std::vector<double> out(x_train.rows(), 0.0);
    std::vector<std::size_t> votes(x_train.rows(), 0);
    for (const auto& tree : model.trees)
        for (std::size_t i = 0; i < x_train.rows(); ++i) {
            if (tree.in_bag[i]) continue;
            out[i] += detail::tree_predict(tree, x_train, i);
            ++votes[i];
        }
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = votes[i] ? out[i] / static_cast<double>(votes[i]) : std::nan("");
    return out;
}

// ---------------------------------------------------------------------------
// Linear epsilon-insensitive SVR, trained by epoch-decayed full-batch
// subgradient descent on 0.5||w||^2 + C * sum_i max(0, |r_i| - eps).
// ---------------------------------------------------------------------------

struct SvrConfig {
    double c = 1.0;
    double epsilon = 0.1;
    std::size_t epochs = 200;
    double lr = 0.5;
    double lr_decay = 0.05; // lr_e = lr / (1 + lr_decay * e)
    std::uint64_t seed = 0;
};

struct SvrModel {
    std::vector<double> weights;
    double intercept = 0.0;
    double epsilon = 0.1;
    double c = 1.0;
    std::vector<double> objective_history; // unnormalized objective per epoch
};

inline SvrModel train_svr(const Matrix& x, const std::vector<double>& y, const SvrConfig& cfg) {
    if (!(cfg.c > 0.0)) throw ParamError("train_svr: C must be > 0");
    if (cfg.epsilon < 0.0) throw ParamError("train_svr: epsilon must be >= 0");
    if (x.rows() != y.size() || x.rows() == 0)
        throw ShapeError("train_svr: X has " + std::to_string(x.rows()) + " rows, y has " +
                         std::to_string(y.size()));
    const std::size_t n = x.rows(), p = x.cols();
    const double inv_n = 1.0 / static_cast<double>(n);

    SvrModel model;
    model.epsilon = cfg.epsilon;
    model.c = cfg.c;
    model.weights.assign(p, 0.0);
    model.intercept = std::accumulate(y.begin(), y.end(), 0.0) * inv_n;

    std::vector<double> gw(p);
    for (std::size_t e = 0; e < cfg.epochs; ++e) {
        std::fill(gw.begin(), gw.end(), 0.0);
        double gb = 0.0, hinge = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double pred = model.intercept;
            auto xi = x.row(i);
            for (std::size_t j = 0; j < p; ++j) pred += model.weights[j] * xi[j];
            const double r = y[i] - pred;
            if (std::abs(r) <= cfg.epsilon) continue;
            hinge += std::abs(r) - cfg.epsilon;
            const double s = r > 0.0 ? -1.0 : 1.0; // d|r|/d pred direction
            for (std::size_t j = 0; j < p; ++j) gw[j] += s * xi[j];
            gb += s;
        }
        double wnorm2 = 0.0;
        for (double w : model.weights) wnorm2 += w * w;
        model.objective_history.push_back(0.5 * wnorm2 + cfg.c * hinge);

        // gradient of the objective scaled by 1/n (same minimizer, n-free step size)
        const double lr_e = cfg.lr / (1.0 + cfg.lr_decay * static_cast<double>(e));
        for (std::size_t j = 0; j < p; ++j)
            model.weights[j] -= lr_e * (model.weights[j] + cfg.c * gw[j]) * inv_n;
        model.intercept -= lr_e * cfg.c * gb * inv_n;
    }
    return model;
}

inline std::vector<double> linear_predict(const std::vector<double>& w, double b, const Matrix& x) {
    if (x.cols() != w.size())
        throw ShapeError("predict: model expects " + std::to_string(w.size()) + " features, got " +
                         std::to_string(x.cols()));
    std::vector<double> out(x.rows(), b);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        auto xi = x.row(i);
        for (std::size_t j = 0; j < w.size(); ++j) out[i] += w[j] * xi[j];
    }
    return out;
}

inline std::vector<double> predict(const LinearModel& model, const Matrix& x) {
    return linear_predict(model.weights, model.intercept, x);
}

inline std::vector<double> predict(const SvrModel& model, const Matrix& x) {
    return linear_predict(model.weights, model.intercept, x);
}

} // namespace tabrep::supervised
