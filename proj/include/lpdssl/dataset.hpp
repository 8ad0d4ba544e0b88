#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "lpdssl/matrix.hpp"
#include "lpdssl/random.hpp"

namespace lpdssl {

/// A collection of examples with a labeled/unlabeled split.
///
/// `inputs` holds the raw inputs fed to the classifier; `descriptors` holds
/// the vectors the affinity graph is built from (initially a copy of the
/// inputs, later overwritten with network features). `labels[i]` is -1 for
/// unlabeled examples. `ground_truth` is evaluation-only and may be empty.
struct Dataset {
    Matrix inputs;
    Matrix descriptors;
    std::vector<std::size_t> labeled_indices;  // ascending, no duplicates
    std::vector<int> labels;                   // size n, -1 where unlabeled
    std::size_t num_classes = 0;
    std::vector<int> ground_truth;

    std::size_t size() const { return inputs.rows(); }

    std::vector<std::size_t> unlabeled_indices() const {
        std::vector<std::size_t> u;
        u.reserve(size() - labeled_indices.size());
        for (std::size_t i = 0; i < size(); ++i)
            if (labels[i] < 0) u.push_back(i);
        return u;
    }

    void validate() const {
        if (labeled_indices.empty()) throw std::invalid_argument("dataset has no labeled examples");
        if (labels.size() != size()) throw std::invalid_argument("labels size mismatch");
        std::size_t prev = 0;
        bool first = true;
        for (std::size_t i : labeled_indices) {
            if (i >= size()) throw std::invalid_argument("labeled index out of range");
            if (!first && i <= prev) throw std::invalid_argument("labeled indices not strictly increasing");
            if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes)
                throw std::invalid_argument("label value out of range");
            prev = i;
            first = false;
        }
    }
};

/// Two interleaved half-circles of radius 1 with the given per-moon point
/// counts; the second moon is offset by (1, -0.5). Classes alternate point by
/// point until the smaller moon is exhausted. Ground-truth class ids are kept
/// out-of-band for evaluation; nothing is labeled yet.
inline Dataset generate_two_moons(std::size_t n_first, std::size_t n_second, double noise,
                                  std::uint64_t seed) {
    std::size_t n = n_first + n_second;
    if (n < 2) throw std::invalid_argument("two-moons dataset needs at least 2 points");
    if (noise < 0.0) throw std::invalid_argument("noise stddev must be nonnegative");

    std::mt19937 rng(static_cast<std::uint32_t>(seed));
    Dataset ds;
    ds.inputs = Matrix(n, 2);
    ds.labels.assign(n, -1);
    ds.ground_truth.resize(n);
    ds.num_classes = 2;

    std::size_t placed0 = 0, placed1 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        int cls;
        if (placed1 >= n_second)
            cls = 0;
        else if (placed0 >= n_first)
            cls = 1;
        else
            cls = static_cast<int>(i % 2);
        (cls == 0 ? placed0 : placed1)++;

        double t = detail::uniform01(rng) * std::numbers::pi;
        double x, y;
        if (cls == 0) {
            x = std::cos(t);
            y = std::sin(t);
        } else {
            x = 1.0 + std::cos(t);
            y = -0.5 - std::sin(t);
        }
        x += noise * detail::gaussian(rng);
        y += noise * detail::gaussian(rng);
        ds.inputs(i, 0) = x;
        ds.inputs(i, 1) = y;
        ds.ground_truth[i] = cls;
    }
    ds.descriptors = ds.inputs;
    return ds;
}

inline Dataset generate_two_moons(std::size_t n, double noise, std::uint64_t seed) {
    return generate_two_moons((n + 1) / 2, n / 2, noise, seed);
}

/// Moves exactly `per_class` ground-truth examples of every class into the
/// labeled set, uniformly at random. The rest become the unlabeled set.
inline void select_labels(Dataset& ds, std::size_t per_class, std::uint64_t seed) {
    if (per_class == 0) throw std::invalid_argument("per_class must be at least 1");
    if (ds.ground_truth.size() != ds.size())
        throw std::invalid_argument("select_labels requires ground-truth classes");

    std::mt19937 rng(static_cast<std::uint32_t>(seed));
    ds.labels.assign(ds.size(), -1);
    ds.labeled_indices.clear();
    for (std::size_t cls = 0; cls < ds.num_classes; ++cls) {
        std::vector<std::size_t> pool;
        for (std::size_t i = 0; i < ds.size(); ++i)
            if (ds.ground_truth[i] == static_cast<int>(cls)) pool.push_back(i);
        if (pool.size() < per_class)
            throw std::invalid_argument("class " + std::to_string(cls) + " has only " +
                                        std::to_string(pool.size()) + " examples, need " +
                                        std::to_string(per_class));
        // Fisher-Yates prefix of length per_class.
        for (std::size_t j = 0; j < per_class; ++j) {
            std::size_t swap_with = j + static_cast<std::size_t>(detail::uniform01(rng) *
                                                                 static_cast<double>(pool.size() - j));
            std::swap(pool[j], pool[swap_with]);
            ds.labels[pool[j]] = static_cast<int>(cls);
            ds.labeled_indices.push_back(pool[j]);
        }
    }
    std::sort(ds.labeled_indices.begin(), ds.labeled_indices.end());
}

/// n x c matrix with one-hot rows for labeled examples, zero rows otherwise.
inline Matrix build_label_matrix(const Dataset& ds) {
    ds.validate();
    Matrix y(ds.size(), ds.num_classes);
    for (std::size_t i : ds.labeled_indices) y(i, static_cast<std::size_t>(ds.labels[i])) = 1.0;
    return y;
}

}  // namespace lpdssl
