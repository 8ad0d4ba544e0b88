#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "lpdssl/matrix.hpp"
#include "lpdssl/sparse.hpp"

namespace lpdssl {

struct GraphConfig {
    std::size_t k = 50;
    double gamma = 3.0;
};

struct Neighbor {
    std::size_t index;
    double score;  // inner product with the query point
};

/// Exact brute-force k-nearest-neighbor search by inner product. Entry [j]
/// lists the k points i != j with the largest v_i . v_j, sorted by score
/// descending with ties broken toward the lower index. Rows of V are
/// expected (not enforced) to be l2-normalized.
inline std::vector<std::vector<Neighbor>> knn_search(const Matrix& v, std::size_t k) {
    const std::size_t n = v.rows();
    if (k < 1 || k >= n) throw std::invalid_argument("knn_search requires 1 <= k < n");

    std::vector<std::vector<Neighbor>> result(n);
    std::vector<Neighbor> candidates(n - 1);
    for (std::size_t j = 0; j < n; ++j) {
        std::size_t m = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (i == j) continue;
            candidates[m++] = {i, dot(v.row(i), v.row(j))};
        }
        auto better = [](const Neighbor& a, const Neighbor& b) {
            return a.score > b.score || (a.score == b.score && a.index < b.index);
        };
        std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k),
                          candidates.end(), better);
        result[j].assign(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k));
    }
    return result;
}

/// Sparse affinity matrix: a_ij = [v_i . v_j]_+ ^ gamma when v_i is among
/// the k nearest neighbors of v_j, zero otherwise. Diagonal is zero; clipped
/// (nonpositive) inner products are dropped rather than stored.
inline SparseMatrix build_affinity(const Matrix& v, const GraphConfig& config) {
    auto neighbors = knn_search(v, config.k);
    const std::size_t n = v.rows();
    std::vector<std::tuple<std::size_t, std::size_t, double>> triplets;
    triplets.reserve(n * config.k);
    for (std::size_t j = 0; j < n; ++j) {
        for (const Neighbor& nb : neighbors[j]) {
            if (nb.score <= 0.0) continue;
            triplets.emplace_back(nb.index, j, std::pow(nb.score, config.gamma));
        }
    }
    return SparseMatrix::from_triplets(n, n, std::move(triplets));
}

/// W = A + A^T: symmetric nonnegative adjacency with zero diagonal.
inline SparseMatrix symmetrize(const SparseMatrix& a) {
    if (a.n_rows != a.n_cols) throw std::invalid_argument("symmetrize requires a square matrix");
    return add(a, a.transpose());
}

struct NormalizedGraph {
    SparseMatrix adjacency;       // D^{-1/2} W D^{-1/2}
    std::vector<double> degrees;  // row sums of W
};

/// Symmetric normalization. Zero-degree rows and columns stay all-zero
/// (d^{-1/2} := 0 when d = 0), so isolated nodes keep their label row intact
/// under diffusion.
inline NormalizedGraph normalize(const SparseMatrix& w) {
    NormalizedGraph g;
    g.degrees = w.row_sums();
    std::vector<double> inv_sqrt(g.degrees.size());
    for (std::size_t i = 0; i < g.degrees.size(); ++i)
        inv_sqrt[i] = g.degrees[i] > 0.0 ? 1.0 / std::sqrt(g.degrees[i]) : 0.0;
    g.adjacency = w;
    for (std::size_t i = 0; i < w.n_rows; ++i)
        for (std::size_t p = w.row_offsets[i]; p < w.row_offsets[i + 1]; ++p)
            g.adjacency.values[p] = w.values[p] * inv_sqrt[i] * inv_sqrt[w.col_indices[p]];
    return g;
}

}  // namespace lpdssl
