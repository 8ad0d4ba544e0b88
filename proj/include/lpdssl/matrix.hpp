#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace lpdssl {

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline double euclidean_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

/// Index of the largest entry; ties resolve to the lowest index.
inline std::size_t argmax(std::span<const double> v) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < v.size(); ++j)
        if (v[j] > v[best]) best = j;
    return best;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

/// Divides each nonzero row by its Euclidean norm. All-zero rows stay zero.
inline void l2_normalize_rows(Matrix& m) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
        auto r = m.row(i);
        double norm = euclidean_norm(r);
        if (norm == 0.0) continue;
        for (double& x : r) x /= norm;
    }
}

inline Matrix l2_normalized_rows(Matrix m) {
    l2_normalize_rows(m);
    return m;
}

}  // namespace lpdssl
