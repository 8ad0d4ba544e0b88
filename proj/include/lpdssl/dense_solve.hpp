#pragma once

// Dense direct solve of the diffusion system, used as an independent
// cross-check for the sparse CG path. Never called from the pipeline.

#include <cstddef>
#include <stdexcept>

#include <Eigen/Dense>

#include "lpdssl/matrix.hpp"
#include "lpdssl/sparse.hpp"

namespace lpdssl {

/// Z = (I - alpha * W)^{-1} Y via dense LDLT factorization. Refuses inputs
/// beyond the size cap: this path is O(n^3) and meant for verification only.
inline Matrix diffuse_dense(const SparseMatrix& w_norm, const Matrix& y, double alpha,
                            std::size_t size_cap = 2000) {
    const std::size_t n = y.rows();
    if (n > size_cap) throw std::invalid_argument("diffuse_dense: n exceeds the dense size cap");
    if (w_norm.n_rows != n || w_norm.n_cols != n)
        throw std::invalid_argument("diffuse_dense: graph/label shape mismatch");

    Eigen::MatrixXd system = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n),
                                                       static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = w_norm.row_offsets[i]; p < w_norm.row_offsets[i + 1]; ++p)
            system(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(w_norm.col_indices[p])) -=
                alpha * w_norm.values[p];

    Eigen::MatrixXd rhs(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(y.cols()));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < y.cols(); ++j)
            rhs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = y(i, j);

    Eigen::MatrixXd solution = system.ldlt().solve(rhs);

    Matrix z(n, y.cols());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < y.cols(); ++j)
            z(i, j) = solution(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    return z;
}

}  // namespace lpdssl
