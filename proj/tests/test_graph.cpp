#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <random>
#include <sstream>
#include <vector>

#include "lpdssl/graph.hpp"
#include "lpdssl/matrix.hpp"
#include "lpdssl/random.hpp"
#include "lpdssl/sparse.hpp"

using namespace lpdssl;

namespace {

Matrix random_unit_rows(std::size_t n, std::size_t d, std::uint32_t seed) {
    std::mt19937 rng(seed);
    Matrix m(n, d);
    for (double& x : m.data()) x = detail::gaussian(rng);
    l2_normalize_rows(m);
    return m;
}

/// Full-sort reference for nearest neighbors: all inner products, stable
/// sort by score descending then index, take the first k.
std::vector<std::vector<std::size_t>> knn_full_sort(const Matrix& v, std::size_t k) {
    const std::size_t n = v.rows();
    std::vector<std::vector<std::size_t>> out(n);
    for (std::size_t j = 0; j < n; ++j) {
        std::vector<std::pair<double, std::size_t>> scored;
        for (std::size_t i = 0; i < n; ++i) {
            if (i == j) continue;
            scored.emplace_back(-dot(v.row(i), v.row(j)), i);
        }
        std::sort(scored.begin(), scored.end());
        for (std::size_t p = 0; p < k; ++p) out[j].push_back(scored[p].second);
    }
    return out;
}

Eigen::MatrixXd to_dense(const SparseMatrix& m) {
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m.n_rows),
                                              static_cast<Eigen::Index>(m.n_cols));
    for (std::size_t i = 0; i < m.n_rows; ++i)
        for (std::size_t p = m.row_offsets[i]; p < m.row_offsets[i + 1]; ++p)
            d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(m.col_indices[p])) =
                m.values[p];
    return d;
}

SparseMatrix random_normalized_graph(std::size_t n, std::size_t k, std::uint32_t seed) {
    Matrix v = random_unit_rows(n, 5, seed);
    return normalize(symmetrize(build_affinity(v, {k, 3.0}))).adjacency;
}

}  // namespace

TEST_CASE("knn_search finds the duplicate vector first") {
    Matrix v(3, 2);
    v(0, 0) = 1.0;
    v(1, 1) = 1.0;
    v(2, 0) = 1.0;
    auto nn = knn_search(v, 1);
    CHECK(nn[0][0].index == 2);
    CHECK(nn[0][0].score == Catch::Approx(1.0));
}

TEST_CASE("knn_search on two points pairs them up") {
    Matrix v(2, 2);
    v(0, 0) = 1.0;
    v(1, 0) = 0.5;
    auto nn = knn_search(v, 1);
    CHECK(nn[0][0].index == 1);
    CHECK(nn[1][0].index == 0);
}

TEST_CASE("knn_search rejects k out of range") {
    Matrix v(3, 2, 1.0);
    CHECK_THROWS_AS(knn_search(v, 0), std::invalid_argument);
    CHECK_THROWS_AS(knn_search(v, 3), std::invalid_argument);
}

TEST_CASE("knn_search matches the full-sort reference") {
    for (std::uint32_t seed = 0; seed < 5; ++seed) {
        Matrix v = random_unit_rows(50, 5, 100 + seed);
        auto fast = knn_search(v, 7);
        auto reference = knn_full_sort(v, 7);
        for (std::size_t j = 0; j < v.rows(); ++j) {
            for (std::size_t p = 0; p < 7; ++p) CHECK(fast[j][p].index == reference[j][p]);
        }
    }
}

TEST_CASE("affinity values follow the clipped power rule") {
    SECTION("identical unit vectors give affinity 1") {
        Matrix v(2, 2);
        v(0, 0) = v(1, 0) = 1.0;
        SparseMatrix a = build_affinity(v, {1, 3.0});
        CHECK(a.at(0, 1) == Catch::Approx(1.0));
        CHECK(a.at(1, 0) == Catch::Approx(1.0));
    }
    SECTION("orthogonal neighbors are clipped to zero and dropped") {
        Matrix v(2, 2);
        v(0, 0) = 1.0;
        v(1, 1) = 1.0;
        SparseMatrix a = build_affinity(v, {1, 3.0});
        CHECK(a.nnz() == 0);
    }
    SECTION("negative inner products are clipped") {
        Matrix v(2, 2);
        v(0, 0) = 1.0;
        v(1, 0) = -0.5;
        SparseMatrix a = build_affinity(v, {1, 3.0});
        CHECK(a.nnz() == 0);
    }
    SECTION("gamma 0 gives binary affinities on positive pairs") {
        Matrix v(2, 2);
        v(0, 0) = 1.0;
        v(1, 0) = 0.5;
        SparseMatrix a = build_affinity(v, {1, 0.0});
        CHECK(a.at(0, 1) == 1.0);
    }
}

TEST_CASE("affinity has a zero diagonal and at most k entries per column") {
    Matrix v = random_unit_rows(40, 3, 11);
    const std::size_t k = 5;
    SparseMatrix a = build_affinity(v, {k, 3.0});
    std::vector<std::size_t> col_counts(40, 0);
    for (std::size_t i = 0; i < a.n_rows; ++i) {
        for (std::size_t p = a.row_offsets[i]; p < a.row_offsets[i + 1]; ++p) {
            CHECK(a.col_indices[p] != i);
            CHECK(a.values[p] >= 0.0);
            CHECK(a.values[p] <= 1.0 + 1e-12);  // unit-norm descriptors
            col_counts[a.col_indices[p]]++;
        }
    }
    for (std::size_t c : col_counts) CHECK(c <= k);
}

TEST_CASE("symmetrize adds the transpose") {
    SparseMatrix a = SparseMatrix::from_triplets(3, 3, {{0, 1, 0.5}});
    SparseMatrix w = symmetrize(a);
    CHECK(w.at(0, 1) == 0.5);
    CHECK(w.at(1, 0) == 0.5);

    SparseMatrix pair = SparseMatrix::from_triplets(2, 2, {{0, 1, 0.8}, {1, 0, 0.8}});
    SparseMatrix w2 = symmetrize(pair);
    CHECK(w2.at(0, 1) == Catch::Approx(1.6));
}

TEST_CASE("symmetrized matrix is exactly symmetric") {
    Matrix v = random_unit_rows(30, 4, 21);
    SparseMatrix w = symmetrize(build_affinity(v, {4, 3.0}));
    Eigen::MatrixXd dense = to_dense(w);
    CHECK((dense - dense.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(dense.diagonal().cwiseAbs().maxCoeff() == 0.0);

    // W has at most 2k entries per row.
    for (std::size_t i = 0; i < w.n_rows; ++i)
        CHECK(w.row_offsets[i + 1] - w.row_offsets[i] <= 8);
}

TEST_CASE("normalization of a two-node graph") {
    SparseMatrix w = SparseMatrix::from_triplets(2, 2, {{0, 1, 4.0}, {1, 0, 4.0}});
    NormalizedGraph g = normalize(w);
    CHECK(g.degrees == std::vector<double>{4.0, 4.0});
    CHECK(g.adjacency.at(0, 1) == Catch::Approx(1.0));
}

TEST_CASE("isolated nodes keep all-zero rows after normalization") {
    SparseMatrix w = SparseMatrix::from_triplets(3, 3, {{0, 1, 2.0}, {1, 0, 2.0}});
    NormalizedGraph g = normalize(w);
    CHECK(g.degrees[2] == 0.0);
    CHECK(g.adjacency.row_offsets[3] == g.adjacency.row_offsets[2]);
}

TEST_CASE("normalized adjacency has spectrum within [-1, 1]") {
    SparseMatrix wn = random_normalized_graph(30, 4, 33);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(to_dense(wn));
    CHECK(eig.eigenvalues().cwiseAbs().maxCoeff() <= 1.0 + 1e-10);
}

TEST_CASE("normalization is scale invariant") {
    Matrix v = random_unit_rows(25, 4, 44);
    SparseMatrix w = symmetrize(build_affinity(v, {3, 3.0}));

    SparseMatrix w4 = w;
    for (double& x : w4.values) x *= 4.0;  // power of two: exact
    NormalizedGraph g = normalize(w);
    NormalizedGraph g4 = normalize(w4);
    REQUIRE(g4.adjacency.values.size() == g.adjacency.values.size());
    for (std::size_t p = 0; p < g.adjacency.values.size(); ++p)
        CHECK(g4.adjacency.values[p] == g.adjacency.values[p]);

    SparseMatrix w3 = w;
    for (double& x : w3.values) x *= 3.0;
    NormalizedGraph g3 = normalize(w3);
    for (std::size_t p = 0; p < g.adjacency.values.size(); ++p)
        CHECK(g3.adjacency.values[p] == Catch::Approx(g.adjacency.values[p]).epsilon(1e-14));
}

TEST_CASE("I - alpha * normalized adjacency is positive definite") {
    for (std::uint32_t seed = 0; seed < 3; ++seed) {
        SparseMatrix wn = random_normalized_graph(60, 6, 50 + seed);
        for (double alpha : {0.5, 0.9, 0.99}) {
            Eigen::MatrixXd system =
                Eigen::MatrixXd::Identity(60, 60) - alpha * to_dense(wn);
            Eigen::LLT<Eigen::MatrixXd> llt(system);
            CHECK(llt.info() == Eigen::Success);
        }
    }
}

TEST_CASE("triplet dump is sorted by row then column") {
    SparseMatrix w = SparseMatrix::from_triplets(2, 2, {{1, 0, 2.0}, {0, 1, 2.0}});
    std::ostringstream out;
    dump_triplets(w, out);
    CHECK(out.str() == "0 1 2\n1 0 2\n");
}
