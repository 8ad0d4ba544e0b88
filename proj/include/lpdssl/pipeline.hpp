#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "lpdssl/dataset.hpp"
#include "lpdssl/diffusion.hpp"
#include "lpdssl/graph.hpp"
#include "lpdssl/matrix.hpp"
#include "lpdssl/model.hpp"
#include "lpdssl/random.hpp"

namespace lpdssl {

struct TrainConfig {
    std::size_t epochs_supervised = 30;  // T
    std::size_t epochs_iterative = 70;   // T'
    std::size_t batch_labeled = 10;      // B_L
    std::size_t batch_unlabeled = 50;    // B_U
    double learning_rate = 0.05;
    double momentum = 0.9;
    std::size_t cosine_horizon = 0;  // 0 derives a horizon slightly past T + T'
    std::uint64_t seed = 0;
    bool use_certainty_weights = true;    // omega on/off (ablation)
    bool use_class_weights = true;        // zeta on/off (ablation)
    bool use_network_predictions = false; // pseudo-labels from the classifier, not diffusion

    std::size_t effective_horizon() const {
        if (cosine_horizon > 0) return cosine_horizon;
        // Schedule would hit zero a bit after training ends, as with 210
        // annealing epochs for 180 training epochs.
        std::size_t total = epochs_supervised + epochs_iterative;
        return total + (total + 5) / 6;
    }

    void validate() const {
        if (batch_labeled + batch_unlabeled == 0)
            throw std::invalid_argument("batch size B_L + B_U must be positive");
        if (!(learning_rate >= 0.0)) throw std::invalid_argument("learning rate must be nonnegative");
    }
};

struct TestSet {
    Matrix inputs;
    std::vector<int> labels;
};

struct EpochReport {
    std::size_t epoch = 0;  // phase-2 epoch index, starting at 0
    std::optional<double> pseudo_accuracy;
    double mean_omega = 0.0;
    std::vector<std::size_t> class_populations;
    double train_loss = 0.0;
    std::optional<double> test_error;
    std::vector<double> cg_residuals;
};

/// Mutable training-loop state: optimizer momentum, the shuffling RNG, the
/// global epoch counter driving the cosine schedule, and the cycling pool of
/// labeled examples used to fill the labeled quota of phase-2 batches.
struct TrainingState {
    SgdState sgd;
    std::mt19937 rng;
    std::size_t epoch = 0;         // global, drives the lr schedule
    std::size_t phase2_epochs = 0;
    std::vector<std::size_t> labeled_order;
    std::size_t labeled_cursor = 0;

    static TrainingState init(const ToyModel& model, const TrainConfig& config) {
        TrainingState s;
        s.sgd = SgdState::init(model);
        s.rng.seed(static_cast<std::uint32_t>(config.seed ^ 0x9e3779b9u));
        return s;
    }
};

namespace detail {

inline void shuffle_indices(std::vector<std::size_t>& v, std::mt19937& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i));
        std::swap(v[i - 1], v[j]);
    }
}

inline std::vector<std::size_t> next_labeled_quota(const Dataset& ds, std::size_t quota,
                                                   TrainingState& state) {
    std::vector<std::size_t> batch;
    batch.reserve(quota);
    while (batch.size() < quota) {
        if (state.labeled_cursor >= state.labeled_order.size()) {
            state.labeled_order = ds.labeled_indices;
            shuffle_indices(state.labeled_order, state.rng);
            state.labeled_cursor = 0;
        }
        batch.push_back(state.labeled_order[state.labeled_cursor++]);
    }
    return batch;
}

inline double evaluate_error(const ToyModel& model, const TestSet& test) {
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < test.inputs.rows(); ++i)
        if (model.predict(test.inputs.row(i)) != test.labels[i]) ++wrong;
    return static_cast<double>(wrong) / static_cast<double>(test.inputs.rows());
}

/// Pseudo-labels and weights from the classifier's own softmax outputs, the
/// network-prediction baseline swapped in for diffusion under
/// use_network_predictions.
inline DiffusionOutput network_scores(const Matrix& probs, const Dataset& ds) {
    return finalize_scores(probs, probs, ds);
}

}  // namespace detail

/// Phase 1: supervised warm-up for T epochs of mini-batch SGD on the
/// labeled examples only, with seeded shuffling.
inline void run_phase1(ToyModel& model, const Dataset& ds, const TrainConfig& config,
                       TrainingState& state) {
    config.validate();
    ds.validate();
    const std::size_t batch_size = config.batch_labeled + config.batch_unlabeled;
    const std::size_t horizon = config.effective_horizon();

    std::vector<std::size_t> order = ds.labeled_indices;
    std::vector<int> batch_labels;
    for (std::size_t e = 0; e < config.epochs_supervised; ++e) {
        detail::shuffle_indices(order, state.rng);
        double lr = cosine_lr(config.learning_rate, state.epoch, horizon);
        for (std::size_t start = 0; start < order.size(); start += batch_size) {
            std::size_t end = std::min(start + batch_size, order.size());
            std::span<const std::size_t> idx(order.data() + start, end - start);
            batch_labels.clear();
            for (std::size_t i : idx) batch_labels.push_back(ds.labels[i]);
            auto result = supervised_loss(model, ds.inputs, idx, batch_labels);
            sgd_step(model, result.gradients, lr, config.momentum, state.sgd);
        }
        state.epoch++;
    }
}

/// One phase-2 iteration: re-extract descriptors with the current
/// parameters, propagate labels, then train for one epoch on the weighted
/// loss. An epoch is one pass over the originally unlabeled examples; each
/// batch carries exactly B_L labeled examples drawn from a reshuffled
/// cycling pool (the ragged last batch keeps the labeled quota).
inline EpochReport run_phase2_epoch(ToyModel& model, Dataset& ds, const GraphConfig& graph_config,
                                    const DiffusionConfig& diffusion_config,
                                    const TrainConfig& config, TrainingState& state,
                                    const TestSet* test = nullptr) {
    config.validate();
    ds.validate();
    const std::size_t n = ds.size();

    if (ds.descriptors.rows() != n || ds.descriptors.cols() != model.descriptor_dim())
        ds.descriptors = Matrix(n, model.descriptor_dim());
    Matrix probs(n, model.num_classes());
    for (std::size_t i = 0; i < n; ++i) {
        auto act = model.forward(ds.inputs.row(i));
        std::copy(act.descriptor.begin(), act.descriptor.end(), ds.descriptors.row(i).begin());
        std::copy(act.probs.begin(), act.probs.end(), probs.row(i).begin());
    }

    DiffusionOutput out = config.use_network_predictions
                              ? detail::network_scores(probs, ds)
                              : propagate(ds, graph_config, diffusion_config);

    std::vector<double> omega = out.omega;
    std::vector<double> zeta = out.zeta;
    if (!config.use_certainty_weights) std::fill(omega.begin(), omega.end(), 1.0);
    if (!config.use_class_weights) std::fill(zeta.begin(), zeta.end(), 1.0);

    // Per-example lookup for batch assembly.
    std::vector<int> pseudo_of(n, -1);
    std::vector<double> omega_of(n, 0.0);
    for (std::size_t u = 0; u < out.unlabeled.size(); ++u) {
        pseudo_of[out.unlabeled[u]] = out.pseudo_labels[u];
        omega_of[out.unlabeled[u]] = omega[u];
    }

    const double lr = cosine_lr(config.learning_rate, state.epoch, config.effective_horizon());
    double loss_sum = 0.0;
    std::size_t batches = 0;

    if (out.unlabeled.empty()) {
        // Fully labeled boundary case: one supervised epoch under zeta.
        std::vector<std::size_t> order = ds.labeled_indices;
        detail::shuffle_indices(order, state.rng);
        const std::size_t batch_size = config.batch_labeled + config.batch_unlabeled;
        std::vector<int> batch_labels;
        for (std::size_t start = 0; start < order.size(); start += batch_size) {
            std::size_t end = std::min(start + batch_size, order.size());
            std::span<const std::size_t> idx(order.data() + start, end - start);
            batch_labels.clear();
            for (std::size_t i : idx) batch_labels.push_back(ds.labels[i]);
            auto result = weighted_loss(model, ds.inputs, idx, batch_labels, {}, {}, {}, zeta);
            sgd_step(model, result.gradients, lr, config.momentum, state.sgd);
            loss_sum += result.loss;
            ++batches;
        }
    } else {
        std::vector<std::size_t> unlabeled_order = out.unlabeled;
        detail::shuffle_indices(unlabeled_order, state.rng);
        std::vector<int> labeled_y, pseudo_y;
        std::vector<double> batch_omega;
        for (std::size_t start = 0; start < unlabeled_order.size();
             start += config.batch_unlabeled) {
            std::size_t end = std::min(start + config.batch_unlabeled, unlabeled_order.size());
            std::span<const std::size_t> pseudo_idx(unlabeled_order.data() + start, end - start);
            auto labeled_idx = detail::next_labeled_quota(ds, config.batch_labeled, state);

            labeled_y.clear();
            for (std::size_t i : labeled_idx) labeled_y.push_back(ds.labels[i]);
            pseudo_y.clear();
            batch_omega.clear();
            for (std::size_t i : pseudo_idx) {
                pseudo_y.push_back(pseudo_of[i]);
                batch_omega.push_back(omega_of[i]);
            }
            auto result = weighted_loss(model, ds.inputs, labeled_idx, labeled_y, pseudo_idx,
                                        pseudo_y, batch_omega, zeta);
            sgd_step(model, result.gradients, lr, config.momentum, state.sgd);
            loss_sum += result.loss;
            ++batches;
        }
    }
    state.epoch++;

    EpochReport report;
    report.epoch = state.phase2_epochs++;
    report.class_populations = out.class_populations;
    report.cg_residuals = out.cg_residuals;
    report.train_loss = batches > 0 ? loss_sum / static_cast<double>(batches) : 0.0;
    if (!out.omega.empty()) {
        double sum = 0.0;
        for (double w : out.omega) sum += w;
        report.mean_omega = sum / static_cast<double>(out.omega.size());
    }
    if (!ds.ground_truth.empty() && !out.unlabeled.empty()) {
        std::size_t correct = 0;
        for (std::size_t u = 0; u < out.unlabeled.size(); ++u)
            if (out.pseudo_labels[u] == ds.ground_truth[out.unlabeled[u]]) ++correct;
        report.pseudo_accuracy =
            static_cast<double>(correct) / static_cast<double>(out.unlabeled.size());
    }
    if (test) report.test_error = detail::evaluate_error(model, *test);
    return report;
}

struct RunResult {
    ToyModel model;
    std::vector<EpochReport> reports;
};

/// Full iterative loop: supervised warm-up for T epochs, then T' rounds of
/// propagation plus one weighted training epoch each.
inline RunResult run_lpdssl(Dataset& ds, const ModelConfig& model_config,
                            const GraphConfig& graph_config,
                            const DiffusionConfig& diffusion_config, const TrainConfig& config,
                            const TestSet* test = nullptr) {
    RunResult result;
    result.model = ToyModel::init(model_config);
    TrainingState state = TrainingState::init(result.model, config);
    run_phase1(result.model, ds, config, state);
    result.reports.reserve(config.epochs_iterative);
    for (std::size_t e = 0; e < config.epochs_iterative; ++e)
        result.reports.push_back(run_phase2_epoch(result.model, ds, graph_config,
                                                  diffusion_config, config, state, test));
    return result;
}

}  // namespace lpdssl
