#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "tabrep/errors.hpp"

namespace tabrep::numkit {

/// Dense row-major matrix of doubles. Rows are records, columns are features.
class Matrix {
public:
    Matrix() = default;

    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    Matrix(std::initializer_list<std::initializer_list<double>> init) {
        rows_ = init.size();
        cols_ = rows_ ? init.begin()->size() : 0;
        data_.reserve(rows_ * cols_);
        for (const auto& r : init) {
            if (r.size() != cols_)
                throw ShapeError("Matrix initializer rows have unequal lengths");
            data_.insert(data_.end(), r.begin(), r.end());
        }
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    friend bool operator==(const Matrix& a, const Matrix& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline std::string shape_str(const Matrix& m) {
    return "(" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ")";
}

inline void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

/// a * b. Loop order keeps the inner traversal contiguous in both b and the result.
inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw ShapeError("matmul: inner dimensions differ, " + shape_str(a) + " x " + shape_str(b));
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* outi = out.data().data() + i * out.cols();
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            const double* bk = b.data().data() + k * b.cols();
            for (std::size_t j = 0; j < b.cols(); ++j) outi[j] += aik * bk[j];
        }
    }
    return out;
}

/// a * b^T. Row-dot-row, no explicit transpose.
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols())
        throw ShapeError("matmul_nt: inner dimensions differ, " + shape_str(a) + " x " + shape_str(b) + "^T");
    Matrix out(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto ai = a.row(i);
        for (std::size_t j = 0; j < b.rows(); ++j) {
            auto bj = b.row(j);
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += ai[k] * bj[k];
            out(i, j) = s;
        }
    }
    return out;
}

/// a^T * b.
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows())
        throw ShapeError("matmul_tn: inner dimensions differ, " + shape_str(a) + "^T x " + shape_str(b));
    Matrix out(a.cols(), b.cols());
    for (std::size_t k = 0; k < a.rows(); ++k) {
        const double* ak = a.data().data() + k * a.cols();
        const double* bk = b.data().data() + k * b.cols();
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double aki = ak[i];
            if (aki == 0.0) continue;
            double* outi = out.data().data() + i * out.cols();
            for (std::size_t j = 0; j < b.cols(); ++j) outi[j] += aki * bk[j];
        }
    }
    return out;
}

inline Matrix transpose(const Matrix& a) {
    Matrix out(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
    return out;
}

inline Matrix operator+(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "operator+");
    Matrix out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += b.data()[i];
    return out;
}

inline Matrix operator-(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "operator-");
    Matrix out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] -= b.data()[i];
    return out;
}

inline Matrix& operator+=(Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "operator+=");
    for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] += b.data()[i];
    return a;
}

inline Matrix operator*(const Matrix& a, double s) {
    Matrix out = a;
    for (double& v : out.data()) v *= s;
    return out;
}

inline Matrix operator*(double s, const Matrix& a) { return a * s; }

inline Matrix hadamard(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "hadamard");
    Matrix out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= b.data()[i];
    return out;
}

template <typename F>
Matrix apply(const Matrix& a, F f) {
    Matrix out = a;
    for (double& v : out.data()) v = f(v);
    return out;
}

inline std::vector<double> col_sums(const Matrix& a) {
    std::vector<double> s(a.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto r = a.row(i);
        for (std::size_t j = 0; j < a.cols(); ++j) s[j] += r[j];
    }
    return s;
}

inline std::vector<double> col_means(const Matrix& a) {
    auto s = col_sums(a);
    if (a.rows() > 0)
        for (double& v : s) v /= static_cast<double>(a.rows());
    return s;
}

/// Columns [begin, end) as a new matrix.
inline Matrix slice_cols(const Matrix& a, std::size_t begin, std::size_t end) {
    if (begin > end || end > a.cols())
        throw ShapeError("slice_cols: range [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") out of bounds for " + shape_str(a));
    Matrix out(a.rows(), end - begin);
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = begin; j < end; ++j) out(i, j - begin) = a(i, j);
    return out;
}

/// Row subset in the given index order.
inline Matrix take_rows(const Matrix& a, std::span<const std::size_t> idx) {
    Matrix out(idx.size(), a.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= a.rows())
            throw ShapeError("take_rows: index " + std::to_string(idx[i]) + " out of bounds for " + shape_str(a));
        std::copy_n(a.data().data() + idx[i] * a.cols(), a.cols(), out.data().data() + i * a.cols());
    }
    return out;
}

inline Matrix take_rows(const Matrix& a, const std::vector<std::size_t>& idx) {
    return take_rows(a, std::span<const std::size_t>(idx));
}

/// [a | b] side by side.
inline Matrix hcat(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows())
        throw ShapeError("hcat: row counts differ, " + shape_str(a) + " vs " + shape_str(b));
    Matrix out(a.rows(), a.cols() + b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        std::copy_n(a.data().data() + i * a.cols(), a.cols(), out.data().data() + i * out.cols());
        std::copy_n(b.data().data() + i * b.cols(), b.cols(), out.data().data() + i * out.cols() + a.cols());
    }
    return out;
}

inline bool all_finite(const Matrix& a) {
    return std::all_of(a.data().begin(), a.data().end(), [](double v) { return std::isfinite(v); });
}

inline bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

} // namespace tabrep::numkit
