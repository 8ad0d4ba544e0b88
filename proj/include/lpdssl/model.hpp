#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lpdssl/io.hpp"
#include "lpdssl/matrix.hpp"
#include "lpdssl/random.hpp"

namespace lpdssl {

struct LinearLayer {
    Matrix w;               // out x in
    std::vector<double> b;  // out
};

struct ModelConfig {
    std::size_t input_dim = 2;
    std::size_t hidden_dim = 64;
    std::size_t descriptor_dim = 16;
    std::size_t num_classes = 2;
    std::uint64_t seed = 0;
};

/// Small MLP classifier: two rectified hidden layers, a linear layer to the
/// descriptor space followed by l2 normalization, then a linear head with
/// softmax. The unit-norm descriptor is what the affinity graph is built on.
class ToyModel {
public:
    std::array<LinearLayer, 4> layers;

    static ToyModel init(const ModelConfig& config) {
        std::mt19937 rng(static_cast<std::uint32_t>(config.seed));
        ToyModel m;
        const std::size_t dims[5] = {config.input_dim, config.hidden_dim, config.hidden_dim,
                                     config.descriptor_dim, config.num_classes};
        for (std::size_t l = 0; l < 4; ++l) {
            std::size_t in = dims[l], out = dims[l + 1];
            double scale = 1.0 / std::sqrt(static_cast<double>(in));
            m.layers[l].w = Matrix(out, in);
            m.layers[l].b.assign(out, 0.0);
            for (double& x : m.layers[l].w.data())
                x = (2.0 * detail::uniform01(rng) - 1.0) * scale;
        }
        return m;
    }

    std::size_t input_dim() const { return layers[0].w.cols(); }
    std::size_t descriptor_dim() const { return layers[3].w.cols(); }
    std::size_t num_classes() const { return layers[3].w.rows(); }

    struct Activations {
        std::vector<double> input;
        std::vector<double> h1, h2;        // rectified hidden activations
        std::vector<double> pre_desc;      // descriptor before normalization
        double pre_desc_norm = 0.0;
        std::vector<double> descriptor;    // unit norm unless pre_desc is zero
        std::vector<double> probs;         // softmax output
    };

    Activations forward(std::span<const double> x) const {
        if (x.size() != input_dim()) throw std::invalid_argument("forward: input dimension mismatch");
        Activations a;
        a.input.assign(x.begin(), x.end());
        a.h1 = affine(0, a.input);
        rectify(a.h1);
        a.h2 = affine(1, a.h1);
        rectify(a.h2);
        a.pre_desc = affine(2, a.h2);
        a.pre_desc_norm = euclidean_norm(a.pre_desc);
        a.descriptor = a.pre_desc;
        if (a.pre_desc_norm > 0.0)
            for (double& v : a.descriptor) v /= a.pre_desc_norm;
        std::vector<double> logits = affine(3, a.descriptor);
        a.probs = softmax(logits);
        return a;
    }

    std::vector<double> descriptor(std::span<const double> x) const { return forward(x).descriptor; }

    int predict(std::span<const double> x) const {
        return static_cast<int>(argmax(forward(x).probs));
    }

private:
    std::vector<double> affine(std::size_t l, std::span<const double> in) const {
        const Matrix& w = layers[l].w;
        std::vector<double> out(w.rows());
        for (std::size_t i = 0; i < w.rows(); ++i) out[i] = layers[l].b[i] + dot(w.row(i), in);
        return out;
    }

    static void rectify(std::vector<double>& v) {
        for (double& x : v) x = std::max(x, 0.0);
    }

    static std::vector<double> softmax(std::vector<double> logits) {
        double peak = *std::max_element(logits.begin(), logits.end());
        double sum = 0.0;
        for (double& x : logits) {
            x = std::exp(x - peak);
            sum += x;
        }
        for (double& x : logits) x /= sum;
        return logits;
    }
};

using Gradients = std::array<LinearLayer, 4>;

inline Gradients zero_gradients(const ToyModel& m) {
    Gradients g;
    for (std::size_t l = 0; l < 4; ++l) {
        g[l].w = Matrix(m.layers[l].w.rows(), m.layers[l].w.cols());
        g[l].b.assign(m.layers[l].b.size(), 0.0);
    }
    return g;
}

namespace detail {

/// Backpropagates one example's loss gradient w.r.t. the logits through the
/// whole model, accumulating into `g`.
inline void accumulate_backward(const ToyModel& m, const ToyModel::Activations& act,
                                std::span<const double> dlogits, Gradients& g) {
    auto outer_add = [](LinearLayer& layer, std::span<const double> dout,
                        std::span<const double> in) {
        for (std::size_t i = 0; i < dout.size(); ++i) {
            layer.b[i] += dout[i];
            auto row = layer.w.row(i);
            for (std::size_t j = 0; j < in.size(); ++j) row[j] += dout[i] * in[j];
        }
    };
    auto transpose_multiply = [](const Matrix& w, std::span<const double> dout) {
        std::vector<double> din(w.cols(), 0.0);
        for (std::size_t i = 0; i < w.rows(); ++i)
            for (std::size_t j = 0; j < w.cols(); ++j) din[j] += w(i, j) * dout[i];
        return din;
    };

    outer_add(g[3], dlogits, act.descriptor);
    std::vector<double> d_desc = transpose_multiply(m.layers[3].w, dlogits);

    // Through v = a / ||a||: da = (dv - v (v . dv)) / ||a||. Zero pre-norm
    // descriptors pass no gradient.
    std::vector<double> d_pre(act.pre_desc.size(), 0.0);
    if (act.pre_desc_norm > 0.0) {
        double proj = dot(act.descriptor, d_desc);
        for (std::size_t j = 0; j < d_pre.size(); ++j)
            d_pre[j] = (d_desc[j] - act.descriptor[j] * proj) / act.pre_desc_norm;
    }

    outer_add(g[2], d_pre, act.h2);
    std::vector<double> d_h2 = transpose_multiply(m.layers[2].w, d_pre);
    for (std::size_t j = 0; j < d_h2.size(); ++j)
        if (act.h2[j] <= 0.0) d_h2[j] = 0.0;

    outer_add(g[1], d_h2, act.h1);
    std::vector<double> d_h1 = transpose_multiply(m.layers[1].w, d_h2);
    for (std::size_t j = 0; j < d_h1.size(); ++j)
        if (act.h1[j] <= 0.0) d_h1[j] = 0.0;

    outer_add(g[0], d_h1, act.input);
}

inline constexpr double kProbFloor = 1e-12;

inline double cross_entropy(std::span<const double> probs, int label) {
    return -std::log(std::max(probs[static_cast<std::size_t>(label)], kProbFloor));
}

}  // namespace detail

struct LossResult {
    double loss = 0.0;
    Gradients gradients;
};

/// Mean cross-entropy over a batch, with gradients for all parameters.
inline LossResult supervised_loss(const ToyModel& m, const Matrix& inputs,
                                  std::span<const std::size_t> indices,
                                  std::span<const int> labels) {
    if (indices.size() != labels.size())
        throw std::invalid_argument("supervised_loss: index/label size mismatch");
    LossResult result;
    result.gradients = zero_gradients(m);
    if (indices.empty()) return result;

    const double inv_batch = 1.0 / static_cast<double>(indices.size());
    const std::size_t c = m.num_classes();
    std::vector<double> dlogits(c);
    for (std::size_t b = 0; b < indices.size(); ++b) {
        auto act = m.forward(inputs.row(indices[b]));
        int y = labels[b];
        if (y < 0 || static_cast<std::size_t>(y) >= c)
            throw std::invalid_argument("supervised_loss: label out of range");
        result.loss += detail::cross_entropy(act.probs, y) * inv_batch;
        for (std::size_t j = 0; j < c; ++j)
            dlogits[j] = (act.probs[j] - (j == static_cast<std::size_t>(y) ? 1.0 : 0.0)) * inv_batch;
        detail::accumulate_backward(m, act, dlogits, result.gradients);
    }
    if (!std::isfinite(result.loss)) throw std::runtime_error("supervised_loss: non-finite loss");
    return result;
}

/// Weighted loss over a labeled and a pseudo-labeled batch: labeled terms
/// scale by the class weight of the true label, pseudo terms by certainty
/// times the class weight of the pseudo-label. Each sum reduces by its own
/// batch mean before the two are added.
inline LossResult weighted_loss(const ToyModel& m, const Matrix& inputs,
                                std::span<const std::size_t> labeled_idx,
                                std::span<const int> labeled_y,
                                std::span<const std::size_t> pseudo_idx,
                                std::span<const int> pseudo_y, std::span<const double> omega,
                                std::span<const double> zeta) {
    if (labeled_idx.size() != labeled_y.size() || pseudo_idx.size() != pseudo_y.size())
        throw std::invalid_argument("weighted_loss: index/label size mismatch");
    if (omega.size() != pseudo_idx.size())
        throw std::invalid_argument("weighted_loss: missing certainty weight");
    if (zeta.size() != m.num_classes())
        throw std::invalid_argument("weighted_loss: class weight count mismatch");

    LossResult result;
    result.gradients = zero_gradients(m);
    const std::size_t c = m.num_classes();
    std::vector<double> dlogits(c);

    auto add_term = [&](std::size_t index, int y, double weight, double inv_batch) {
        auto act = m.forward(inputs.row(index));
        result.loss += weight * detail::cross_entropy(act.probs, y) * inv_batch;
        for (std::size_t j = 0; j < c; ++j)
            dlogits[j] = weight * inv_batch *
                         (act.probs[j] - (j == static_cast<std::size_t>(y) ? 1.0 : 0.0));
        detail::accumulate_backward(m, act, dlogits, result.gradients);
    };

    if (!labeled_idx.empty()) {
        double inv = 1.0 / static_cast<double>(labeled_idx.size());
        for (std::size_t b = 0; b < labeled_idx.size(); ++b)
            add_term(labeled_idx[b], labeled_y[b], zeta[static_cast<std::size_t>(labeled_y[b])], inv);
    }
    if (!pseudo_idx.empty()) {
        double inv = 1.0 / static_cast<double>(pseudo_idx.size());
        for (std::size_t b = 0; b < pseudo_idx.size(); ++b)
            add_term(pseudo_idx[b], pseudo_y[b],
                     omega[b] * zeta[static_cast<std::size_t>(pseudo_y[b])], inv);
    }
    if (!std::isfinite(result.loss)) throw std::runtime_error("weighted_loss: non-finite loss");
    return result;
}

struct SgdState {
    std::array<LinearLayer, 4> velocity;

    static SgdState init(const ToyModel& m) {
        SgdState s;
        s.velocity = zero_gradients(m);
        return s;
    }
};

inline void sgd_step(ToyModel& m, const Gradients& g, double lr, double momentum, SgdState& state) {
    for (std::size_t l = 0; l < 4; ++l) {
        auto& vw = state.velocity[l].w.data();
        const auto& gw = g[l].w.data();
        auto& w = m.layers[l].w.data();
        for (std::size_t i = 0; i < w.size(); ++i) {
            vw[i] = momentum * vw[i] + gw[i];
            w[i] -= lr * vw[i];
        }
        for (std::size_t i = 0; i < m.layers[l].b.size(); ++i) {
            state.velocity[l].b[i] = momentum * state.velocity[l].b[i] + g[l].b[i];
            m.layers[l].b[i] -= lr * state.velocity[l].b[i];
        }
    }
}

/// Cosine-annealed learning rate: l0 * 0.5 * (1 + cos(pi * epoch / horizon)),
/// clamped to zero beyond the horizon.
inline double cosine_lr(double base, std::size_t epoch, std::size_t horizon) {
    if (horizon == 0 || epoch >= horizon) return epoch == 0 ? base : 0.0;
    return base * 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(epoch) /
                                        static_cast<double>(horizon)));
}

/// Checkpoint: magic, u32 layer count, per layer u32 out/in dims, float32
/// weights row-major then float32 biases. Bit-exact round-trip.
inline void save_checkpoint(const ToyModel& m, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open for writing: " + path.string());
    out.write(kModelMagic, 8);
    detail::write_u32_le(out, 4);
    for (const LinearLayer& layer : m.layers) {
        detail::write_u32_le(out, static_cast<std::uint32_t>(layer.w.rows()));
        detail::write_u32_le(out, static_cast<std::uint32_t>(layer.w.cols()));
        for (double x : layer.w.data()) detail::write_f32_le(out, static_cast<float>(x));
        for (double x : layer.b) detail::write_f32_le(out, static_cast<float>(x));
    }
    if (!out) throw io_error("write failed: " + path.string());
}

inline ToyModel load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open for reading: " + path.string());
    char magic[8];
    if (!in.read(magic, 8)) throw truncated_file_error("file shorter than magic: " + path.string());
    if (std::memcmp(magic, kModelMagic, 8) != 0)
        throw bad_magic_error("bad magic in checkpoint: " + path.string());
    std::uint32_t layer_count = detail::read_u32_le(in, "layer count");
    if (layer_count != 4) throw io_error("unexpected layer count in checkpoint: " + path.string());
    ToyModel m;
    for (LinearLayer& layer : m.layers) {
        std::uint32_t out_dim = detail::read_u32_le(in, "layer rows");
        std::uint32_t in_dim = detail::read_u32_le(in, "layer cols");
        layer.w = Matrix(out_dim, in_dim);
        layer.b.resize(out_dim);
        for (double& x : layer.w.data())
            x = detail::read_f32_le(in, "weights of " + path.string());
        for (double& x : layer.b) x = detail::read_f32_le(in, "biases of " + path.string());
    }
    return m;
}

}  // namespace lpdssl
