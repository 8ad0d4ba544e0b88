#pragma once

#include <algorithm>
#include <cstddef>
#include <ostream>
#include <span>
#include <stdexcept>
#include <tuple>
#include <vector>

namespace lpdssl {

/// Compressed sparse row-major matrix of nonnegative reals. No explicit
/// zeros are stored; column indices are strictly increasing within a row.
struct SparseMatrix {
    std::size_t n_rows = 0;
    std::size_t n_cols = 0;
    std::vector<std::size_t> row_offsets;  // size n_rows + 1
    std::vector<std::size_t> col_indices;
    std::vector<double> values;

    SparseMatrix() : row_offsets(1, 0) {}
    SparseMatrix(std::size_t rows, std::size_t cols)
        : n_rows(rows), n_cols(cols), row_offsets(rows + 1, 0) {}

    std::size_t nnz() const { return values.size(); }

    double at(std::size_t i, std::size_t j) const {
        for (std::size_t p = row_offsets[i]; p < row_offsets[i + 1]; ++p)
            if (col_indices[p] == j) return values[p];
        return 0.0;
    }

    /// y = this * x
    void multiply(std::span<const double> x, std::span<double> y) const {
        for (std::size_t i = 0; i < n_rows; ++i) {
            double s = 0.0;
            for (std::size_t p = row_offsets[i]; p < row_offsets[i + 1]; ++p)
                s += values[p] * x[col_indices[p]];
            y[i] = s;
        }
    }

    std::vector<double> row_sums() const {
        std::vector<double> d(n_rows, 0.0);
        for (std::size_t i = 0; i < n_rows; ++i)
            for (std::size_t p = row_offsets[i]; p < row_offsets[i + 1]; ++p)
                d[i] += values[p];
        return d;
    }

    SparseMatrix transpose() const {
        SparseMatrix t(n_cols, n_rows);
        std::vector<std::size_t> counts(n_cols, 0);
        for (std::size_t c : col_indices) counts[c]++;
        t.row_offsets.assign(n_cols + 1, 0);
        for (std::size_t i = 0; i < n_cols; ++i) t.row_offsets[i + 1] = t.row_offsets[i] + counts[i];
        t.col_indices.resize(nnz());
        t.values.resize(nnz());
        std::vector<std::size_t> cursor(t.row_offsets.begin(), t.row_offsets.end() - 1);
        for (std::size_t i = 0; i < n_rows; ++i) {
            for (std::size_t p = row_offsets[i]; p < row_offsets[i + 1]; ++p) {
                std::size_t dst = cursor[col_indices[p]]++;
                t.col_indices[dst] = i;
                t.values[dst] = values[p];
            }
        }
        return t;
    }

    /// Builds a CSR matrix from (row, col, value) triplets. Duplicate
    /// coordinates are summed; entries that end up zero are dropped.
    static SparseMatrix from_triplets(std::size_t rows, std::size_t cols,
                                      std::vector<std::tuple<std::size_t, std::size_t, double>> triplets) {
        for (const auto& [i, j, v] : triplets)
            if (i >= rows || j >= cols) throw std::invalid_argument("triplet index out of range");
        std::sort(triplets.begin(), triplets.end(),
                  [](const auto& a, const auto& b) {
                      return std::tie(std::get<0>(a), std::get<1>(a)) <
                             std::tie(std::get<0>(b), std::get<1>(b));
                  });
        SparseMatrix m(rows, cols);
        std::size_t p = 0;
        while (p < triplets.size()) {
            auto [i, j, v] = triplets[p++];
            while (p < triplets.size() && std::get<0>(triplets[p]) == i && std::get<1>(triplets[p]) == j)
                v += std::get<2>(triplets[p++]);
            if (v == 0.0) continue;
            m.col_indices.push_back(j);
            m.values.push_back(v);
            m.row_offsets[i + 1]++;
        }
        for (std::size_t i = 0; i < rows; ++i) m.row_offsets[i + 1] += m.row_offsets[i];
        return m;
    }
};

inline SparseMatrix add(const SparseMatrix& a, const SparseMatrix& b) {
    if (a.n_rows != b.n_rows || a.n_cols != b.n_cols)
        throw std::invalid_argument("sparse add: shape mismatch");
    SparseMatrix m(a.n_rows, a.n_cols);
    for (std::size_t i = 0; i < a.n_rows; ++i) {
        std::size_t pa = a.row_offsets[i], pb = b.row_offsets[i];
        const std::size_t ea = a.row_offsets[i + 1], eb = b.row_offsets[i + 1];
        while (pa < ea || pb < eb) {
            std::size_t ja = pa < ea ? a.col_indices[pa] : a.n_cols;
            std::size_t jb = pb < eb ? b.col_indices[pb] : b.n_cols;
            std::size_t j = std::min(ja, jb);
            double v = 0.0;
            if (ja == j) v += a.values[pa++];
            if (jb == j) v += b.values[pb++];
            if (v != 0.0) {
                m.col_indices.push_back(j);
                m.values.push_back(v);
                m.row_offsets[i + 1]++;
            }
        }
    }
    for (std::size_t i = 0; i < m.n_rows; ++i) m.row_offsets[i + 1] += m.row_offsets[i];
    return m;
}

/// Text dump `i j value` per nonzero, sorted by (i, j), LF line endings.
inline void dump_triplets(const SparseMatrix& m, std::ostream& out) {
    for (std::size_t i = 0; i < m.n_rows; ++i)
        for (std::size_t p = m.row_offsets[i]; p < m.row_offsets[i + 1]; ++p)
            out << i << ' ' << m.col_indices[p] << ' ' << m.values[p] << '\n';
}

}  // namespace lpdssl
