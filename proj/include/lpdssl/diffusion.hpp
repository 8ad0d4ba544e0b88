#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lpdssl/dataset.hpp"
#include "lpdssl/graph.hpp"
#include "lpdssl/matrix.hpp"
#include "lpdssl/sparse.hpp"

namespace lpdssl {

struct DiffusionConfig {
    double alpha = 0.99;
    std::size_t max_cg_iters = 20;
    double cg_tolerance = 1e-6;  // relative residual

    void validate() const {
        if (!(alpha >= 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must be in [0, 1)");
        if (max_cg_iters < 1) throw std::invalid_argument("max_cg_iters must be >= 1");
        if (!(cg_tolerance > 0.0)) throw std::invalid_argument("cg_tolerance must be positive");
    }
};

struct CgStats {
    std::vector<double> final_residuals;                  // per class column
    std::vector<std::vector<double>> residual_history;    // per column, per iteration
};

/// Solves (I - alpha * W) Z = Y column by column with plain conjugate
/// gradient from a zero initial guess. Stops at relative residual
/// <= cg_tolerance or at the iteration cap, whichever comes first.
inline Matrix diffuse_cg(const SparseMatrix& w_norm, const Matrix& y, const DiffusionConfig& config,
                         CgStats* stats = nullptr) {
    config.validate();
    const std::size_t n = y.rows();
    const std::size_t c = y.cols();
    if (w_norm.n_rows != n || w_norm.n_cols != n)
        throw std::invalid_argument("diffuse_cg: graph/label shape mismatch");

    Matrix z(n, c);
    if (stats) {
        stats->final_residuals.assign(c, 0.0);
        stats->residual_history.assign(c, {});
    }

    std::vector<double> x(n), r(n), p(n), ap(n), wp(n);
    for (std::size_t col = 0; col < c; ++col) {
        double b_norm_sq = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = 0.0;
            r[i] = y(i, col);
            p[i] = r[i];
            b_norm_sq += r[i] * r[i];
        }
        if (b_norm_sq == 0.0) continue;  // empty class column; solution is zero

        const double b_norm = std::sqrt(b_norm_sq);
        double rs = b_norm_sq;
        double rel = 1.0;
        for (std::size_t it = 0; it < config.max_cg_iters && rel > config.cg_tolerance; ++it) {
            w_norm.multiply(p, wp);
            for (std::size_t i = 0; i < n; ++i) ap[i] = p[i] - config.alpha * wp[i];
            double p_ap = 0.0;
            for (std::size_t i = 0; i < n; ++i) p_ap += p[i] * ap[i];
            double step = rs / p_ap;
            double rs_next = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                x[i] += step * p[i];
                r[i] -= step * ap[i];
                rs_next += r[i] * r[i];
            }
            if (!std::isfinite(rs_next) || !std::isfinite(step))
                throw std::runtime_error("diffuse_cg: non-finite values in column " +
                                         std::to_string(col));
            double beta = rs_next / rs;
            for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
            rs = rs_next;
            rel = std::sqrt(rs) / b_norm;
            if (stats) stats->residual_history[col].push_back(rel);
        }
        if (stats) stats->final_residuals[col] = rel;
        for (std::size_t i = 0; i < n; ++i) z(i, col) = x[i];
    }
    return z;
}

struct RowNormalizeResult {
    Matrix z_hat;
    std::vector<bool> degenerate;  // rows that fell back to the uniform distribution
};

/// Row-wise normalization of diffusion scores into distributions. Negative
/// entries (CG truncation noise; the exact solution is nonnegative) are
/// clipped to zero first. Rows with total mass <= 1e-12 become uniform 1/c
/// and are flagged degenerate.
inline RowNormalizeResult row_normalize(const Matrix& z) {
    const std::size_t n = z.rows(), c = z.cols();
    RowNormalizeResult out{Matrix(n, c), std::vector<bool>(n, false)};
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            double v = std::max(z(i, j), 0.0);
            out.z_hat(i, j) = v;
            sum += v;
        }
        if (sum <= 1e-12) {
            for (std::size_t j = 0; j < c; ++j) out.z_hat(i, j) = 1.0 / static_cast<double>(c);
            out.degenerate[i] = true;
        } else {
            for (std::size_t j = 0; j < c; ++j) out.z_hat(i, j) /= sum;
        }
    }
    return out;
}

/// Pseudo-label per unlabeled row: argmax of the normalized scores, ties
/// toward the lowest class index. Returned vector is aligned with `unlabeled`.
inline std::vector<int> assign_pseudo_labels(const Matrix& z_hat,
                                             const std::vector<std::size_t>& unlabeled) {
    std::vector<int> labels(unlabeled.size());
    for (std::size_t u = 0; u < unlabeled.size(); ++u)
        labels[u] = static_cast<int>(argmax(z_hat.row(unlabeled[u])));
    return labels;
}

/// Entropy-based certainty 1 - H(row)/log(c) in [0, 1], natural log,
/// 0 * log 0 := 0. Not yet rescaled over the unlabeled set.
inline double entropy_weight(std::span<const double> row, std::size_t c) {
    if (c < 2) throw std::invalid_argument("entropy_weight requires c >= 2");
    double h = 0.0;
    for (double p : row)
        if (p > 0.0) h -= p * std::log(p);
    double w = 1.0 - h / std::log(static_cast<double>(c));
    return std::clamp(w, 0.0, 1.0);
}

/// Certainty weights over the unlabeled set, rescaled so the maximum is 1.
/// If every weight is zero the vector stays all-zero.
inline std::vector<double> certainty_weights(const Matrix& z_hat,
                                             const std::vector<std::size_t>& unlabeled) {
    std::vector<double> omega(unlabeled.size());
    double max_w = 0.0;
    for (std::size_t u = 0; u < unlabeled.size(); ++u) {
        omega[u] = entropy_weight(z_hat.row(unlabeled[u]), z_hat.cols());
        max_w = std::max(max_w, omega[u]);
    }
    if (max_w > 0.0)
        for (double& w : omega) w /= max_w;
    return omega;
}

/// Inverse-population class weights, rescaled so the mean over classes with
/// nonzero population is 1. Empty classes get weight 0 and are excluded
/// from the mean.
inline std::vector<double> class_weights(const std::vector<std::size_t>& populations) {
    std::vector<double> zeta(populations.size(), 0.0);
    double sum = 0.0;
    std::size_t nonzero = 0;
    for (std::size_t j = 0; j < populations.size(); ++j) {
        if (populations[j] == 0) continue;
        zeta[j] = 1.0 / static_cast<double>(populations[j]);
        sum += zeta[j];
        ++nonzero;
    }
    if (nonzero == 0) throw std::invalid_argument("class_weights: all classes are empty");
    double mean = sum / static_cast<double>(nonzero);
    for (double& z : zeta) z /= mean;
    return zeta;
}

struct DiffusionOutput {
    Matrix z;                             // raw diffusion scores, n x c
    Matrix z_hat;                         // row-normalized scores
    std::vector<std::size_t> unlabeled;   // U, ascending
    std::vector<int> pseudo_labels;       // per entry of `unlabeled`
    std::vector<double> omega;            // per entry of `unlabeled`, max = 1
    std::vector<double> zeta;             // per class, mean 1 over populated classes
    std::vector<double> cg_residuals;     // final relative residual per class
    std::vector<std::size_t> class_populations;  // |L_j| + |U_j|
};

namespace detail {

/// Shared tail of the propagation pipeline: pseudo-labels, certainty and
/// class weights from an n x c matrix of per-example distributions.
inline DiffusionOutput finalize_scores(Matrix z, Matrix z_hat, const Dataset& ds) {
    DiffusionOutput out;
    out.unlabeled = ds.unlabeled_indices();
    out.pseudo_labels = assign_pseudo_labels(z_hat, out.unlabeled);
    out.omega = certainty_weights(z_hat, out.unlabeled);

    out.class_populations.assign(ds.num_classes, 0);
    for (std::size_t i : ds.labeled_indices)
        out.class_populations[static_cast<std::size_t>(ds.labels[i])]++;
    for (int cls : out.pseudo_labels) out.class_populations[static_cast<std::size_t>(cls)]++;
    out.zeta = class_weights(out.class_populations);

    out.z = std::move(z);
    out.z_hat = std::move(z_hat);
    return out;
}

}  // namespace detail

/// Full label propagation: affinity graph over the dataset descriptors,
/// symmetrization and normalization, CG diffusion, then pseudo-labels,
/// certainty weights and class weights.
inline DiffusionOutput propagate(const Dataset& ds, const GraphConfig& graph_config,
                                 const DiffusionConfig& diffusion_config) {
    Matrix y = build_label_matrix(ds);
    SparseMatrix a = build_affinity(ds.descriptors, graph_config);
    NormalizedGraph g = normalize(symmetrize(a));
    CgStats stats;
    Matrix z = diffuse_cg(g.adjacency, y, diffusion_config, &stats);
    RowNormalizeResult rn = row_normalize(z);
    DiffusionOutput out = detail::finalize_scores(std::move(z), std::move(rn.z_hat), ds);
    out.cg_residuals = std::move(stats.final_residuals);
    return out;
}

}  // namespace lpdssl
