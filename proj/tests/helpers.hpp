#pragma once

// Test-only oracles, independent of the library's computation paths.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <vector>

#include "tabrep/matrix.hpp"

namespace testutil {

using tabrep::numkit::Matrix;

/// Naive triple-loop matrix product, the reference for matmul.
inline Matrix naive_matmul(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
            out(i, j) = s;
        }
    return out;
}

struct GradCheckResult {
    double max_rel_err = 0.0;
    std::size_t worst_index = 0;
};

/// Central finite differences of `loss` against an analytic gradient.
/// Relative error uses max(|ga|, |gn|, floor) as the denominator.
inline GradCheckResult finite_diff_check(const std::function<double(const std::vector<double>&)>& loss,
                                         std::vector<double> params, const std::vector<double>& analytic,
                                         double h = 1e-5, double floor = 1e-6) {
    GradCheckResult res;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double saved = params[i];
        params[i] = saved + h;
        const double up = loss(params);
        params[i] = saved - h;
        const double down = loss(params);
        params[i] = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
        const double rel = std::abs(analytic[i] - numeric) / denom;
        if (rel > res.max_rel_err) {
            res.max_rel_err = rel;
            res.worst_index = i;
        }
    }
    return res;
}

inline std::vector<double> ranks(const std::vector<double>& v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
        i = j + 1;
    }
    return r;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    return pearson(ranks(a), ranks(b));
}

/// Solve A x = b by Gaussian elimination with partial pivoting (oracle for
/// least-squares comparisons; independent of the library solvers).
inline std::vector<double> solve_linear(Matrix a, std::vector<double> b) {
    const std::size_t n = a.rows();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a(r, col)) > std::abs(a(pivot, col))) pivot = r;
        if (pivot != col) {
            for (std::size_t c = 0; c < n; ++c) std::swap(a(col, c), a(pivot, c));
            std::swap(b[col], b[pivot]);
        }
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a(r, col) / a(col, col);
            for (std::size_t c = col; c < n; ++c) a(r, c) -= f * a(col, c);
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t j = i + 1; j < n; ++j) s -= a(i, j) * x[j];
        x[i] = s / a(i, i);
    }
    return x;
}

/// Tiny logistic-regression probe (gradient descent), used to score how
/// linearly separable a representation is.
inline double logistic_probe_accuracy(const Matrix& x_train, const std::vector<int>& y_train,
                                      const Matrix& x_test, const std::vector<int>& y_test,
                                      std::size_t epochs = 500, double lr = 0.5) {
    std::vector<double> w(x_train.cols(), 0.0);
    double b = 0.0;
    const double n = static_cast<double>(x_train.rows());
    for (std::size_t e = 0; e < epochs; ++e) {
        std::vector<double> gw(w.size(), 0.0);
        double gb = 0.0;
        for (std::size_t i = 0; i < x_train.rows(); ++i) {
            double z = b;
            for (std::size_t j = 0; j < w.size(); ++j) z += w[j] * x_train(i, j);
            const double p = 1.0 / (1.0 + std::exp(-z));
            const double d = p - static_cast<double>(y_train[i]);
            for (std::size_t j = 0; j < w.size(); ++j) gw[j] += d * x_train(i, j);
            gb += d;
        }
        for (std::size_t j = 0; j < w.size(); ++j) w[j] -= lr * gw[j] / n;
        b -= lr * gb / n;
    }
    std::size_t correct = 0;
    for (std::size_t i = 0; i < x_test.rows(); ++i) {
        double z = b;
        for (std::size_t j = 0; j < w.size(); ++j) z += w[j] * x_test(i, j);
        if ((z > 0.0 ? 1 : 0) == y_test[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(x_test.rows());
}

} // namespace testutil
