#pragma once

#include <algorithm>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "disent/common.hpp"
#include "disent/losses.hpp"
#include "disent/nn.hpp"
#include "disent/optim.hpp"
#include "disent/snnl.hpp"

namespace disent {

/// Where the companion loss attaches during autoencoder training.
enum class DisentMode {
    baseline,        // no companion loss; labels are ignored
    all_hidden,      // every hidden layer including the latent code
    latent_partial,  // a leading slice of the latent code only
};

inline DisentMode parse_mode(const std::string& name) {
    if (name == "baseline") return DisentMode::baseline;
    if (name == "all_hidden") return DisentMode::all_hidden;
    if (name == "latent_partial") return DisentMode::latent_partial;
    throw std::invalid_argument("unknown mode '" + name +
                                "' (expected baseline, all_hidden, or latent_partial)");
}

inline std::string mode_name(DisentMode mode) {
    switch (mode) {
        case DisentMode::baseline: return "baseline";
        case DisentMode::all_hidden: return "all_hidden";
        case DisentMode::latent_partial: return "latent_partial";
    }
    throw std::invalid_argument("mode_name: unknown mode");
}

struct TrainConfig {
    double alpha = 100.0;  // companion loss weight; 0 disables it
    int epochs = 30;
    Index batch_size = 256;
    std::uint64_t seed = 42;
    TemperatureSchedule schedule;
    AdamConfig adam;
    DisentMode mode = DisentMode::all_hidden;  // autoencoder only
    Index latent_units = 100;                  // latent_partial slice width
};

struct EpochRecord {
    int epoch = 0;
    double temperature = 0.0;
    double primary_loss = 0.0;  // mean over batches
    double snnl_loss = 0.0;     // mean over batches of the summed tap losses
    double total_loss = 0.0;    // mean over batches of primary + alpha * tap sum
    int isolated_batches = 0;   // batches where no point had a same-class neighbor
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
};

/// d -> 500 -> 500 -> k classifier; companion loss taps both hidden layers.
inline Network build_ffn_classifier(Index input_dim, Index num_classes, std::mt19937_64& rng) {
    if (input_dim < 1 || num_classes < 2)
        throw std::invalid_argument("build_ffn_classifier: need input_dim >= 1, classes >= 2");
    Network net;
    net.layers.push_back(make_dense(input_dim, 500, Activation::relu, Init::kaiming, rng));
    net.layers.push_back(make_dense(500, 500, Activation::relu, Init::kaiming, rng));
    net.layers.push_back(make_dense(500, num_classes, Activation::softmax, Init::xavier, rng));
    net.snnl_taps = {0, 1};
    return net;
}

/// conv1d(128 ch, width 5) -> 2048 -> 1024 -> 512 -> k classifier; companion
/// loss taps the conv output and all three hidden dense layers.
inline Network build_cnn_classifier(Index input_dim, Index num_classes, std::mt19937_64& rng) {
    constexpr Index kw = 5;
    if (input_dim < kw)
        throw std::invalid_argument("build_cnn_classifier: input_dim " +
                                    std::to_string(input_dim) + " shorter than kernel width " +
                                    std::to_string(kw));
    if (num_classes < 2) throw std::invalid_argument("build_cnn_classifier: classes >= 2");
    Network net;
    net.layers.push_back(make_conv1d(1, 128, kw, 1, Activation::relu, Init::kaiming, rng));
    const Index flat = 128 * (input_dim - kw + 1);
    net.layers.push_back(make_dense(flat, 2048, Activation::relu, Init::kaiming, rng));
    net.layers.push_back(make_dense(2048, 1024, Activation::relu, Init::kaiming, rng));
    net.layers.push_back(make_dense(1024, 512, Activation::relu, Init::kaiming, rng));
    net.layers.push_back(make_dense(512, num_classes, Activation::softmax, Init::xavier, rng));
    net.snnl_taps = {0, 1, 2, 3};
    return net;
}

/// Symmetric d-500-500-2000-z-2000-500-500-d autoencoder. Hidden layers are
/// ReLU/Kaiming; the latent code and the reconstruction are logistic/Xavier.
inline Network build_autoencoder(Index input_dim, Index latent_dim, std::mt19937_64& rng) {
    if (input_dim < 1 || latent_dim < 1)
        throw std::invalid_argument("build_autoencoder: dimensions must be positive");
    Network net;
    net.layers.push_back(make_dense(input_dim, 500, Activation::relu, Init::kaiming, rng));
    net.layers.push_back(make_dense(500, 500, Activation::relu, Init::kaiming, rng));
    net.layers.push_back(make_dense(500, 2000, Activation::relu, Init::kaiming, rng));
    net.layers.push_back(make_dense(2000, latent_dim, Activation::logistic, Init::xavier, rng));
    net.layers.push_back(make_dense(latent_dim, 2000, Activation::relu, Init::kaiming, rng));
    net.layers.push_back(make_dense(2000, 500, Activation::relu, Init::kaiming, rng));
    net.layers.push_back(make_dense(500, 500, Activation::relu, Init::kaiming, rng));
    net.layers.push_back(make_dense(500, input_dim, Activation::logistic, Init::xavier, rng));
    net.latent_layer = static_cast<int>(net.layers.size() / 2 - 1);
    return net;
}

/// Encoder output (latent post-activations) without running the decoder,
/// evaluated in row chunks to bound intermediate memory.
inline Matrix encode(const Network& net, const Matrix& x, Index chunk = 1024) {
    if (net.latent_layer < 0)
        throw std::invalid_argument("encode: network has no latent layer");
    if (chunk < 1) throw std::invalid_argument("encode: chunk must be >= 1");
    Matrix out;
    for (Index begin = 0; begin < x.rows(); begin += chunk) {
        const Index rows = std::min(chunk, x.rows() - begin);
        Matrix current = x.middleRows(begin, rows);
        for (int l = 0; l <= net.latent_layer; ++l)
            current = layer_forward(net.layers[static_cast<std::size_t>(l)], current);
        if (out.size() == 0) out.resize(x.rows(), current.cols());
        out.middleRows(begin, rows) = current;
    }
    return out;
}

/// Argmax class predictions, evaluated in row chunks to bound the size of the
/// intermediate activation records.
inline std::vector<int> predict_labels(const Network& net, const Matrix& x, Index chunk = 1024) {
    if (chunk < 1) throw std::invalid_argument("predict_labels: chunk must be >= 1");
    std::vector<int> labels(static_cast<std::size_t>(x.rows()));
    for (Index begin = 0; begin < x.rows(); begin += chunk) {
        const Index rows = std::min(chunk, x.rows() - begin);
        const Matrix probs = predict(net, x.middleRows(begin, rows));
        for (Index i = 0; i < rows; ++i) {
            Index best = 0;
            probs.row(i).maxCoeff(&best);
            labels[static_cast<std::size_t>(begin + i)] = static_cast<int>(best);
        }
    }
    return labels;
}

namespace detail {

inline std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed, int epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto rng = make_rng(mix_seed(seed, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);
    return order;
}

inline Matrix gather_rows(const Matrix& x, const std::vector<std::size_t>& order,
                          std::size_t begin, std::size_t end) {
    Matrix out(static_cast<Index>(end - begin), x.cols());
    for (std::size_t r = begin; r < end; ++r)
        out.row(static_cast<Index>(r - begin)) = x.row(static_cast<Index>(order[r]));
    return out;
}

inline std::vector<int> gather_labels(const std::vector<int>& y,
                                      const std::vector<std::size_t>& order, std::size_t begin,
                                      std::size_t end) {
    std::vector<int> out;
    out.reserve(end - begin);
    for (std::size_t r = begin; r < end; ++r) out.push_back(y[order[r]]);
    return out;
}

}  // namespace detail

/// Minibatch Adam training of a softmax classifier with the companion loss
/// attached at the network's tap layers. alpha == 0 recovers plain
/// cross-entropy training.
inline TrainHistory train_classifier(Network& net, const Matrix& x, const std::vector<int>& y,
                                     const TrainConfig& cfg) {
    const auto n = static_cast<std::size_t>(x.rows());
    if (y.size() != n) throw std::invalid_argument("train_classifier: feature/label size mismatch");
    if (n == 0) throw std::invalid_argument("train_classifier: empty dataset");
    if (cfg.batch_size < 1) throw std::invalid_argument("train_classifier: batch_size must be >= 1");
    if (cfg.epochs < 1) throw std::invalid_argument("train_classifier: epochs must be >= 1");
    const bool use_snnl = cfg.alpha != 0.0;

    AdamState adam = make_adam_state(net, cfg.adam);
    TrainHistory history;
    const auto bs = static_cast<std::size_t>(cfg.batch_size);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double temperature = annealing_temperature(epoch, cfg.schedule);
        const auto order = detail::epoch_permutation(n, cfg.seed, epoch);
        EpochRecord rec;
        rec.epoch = epoch;
        rec.temperature = temperature;
        std::size_t batches = 0;
        for (std::size_t begin = 0; begin < n; begin += bs, ++batches) {
            const std::size_t end = std::min(begin + bs, n);
            const Matrix xb = detail::gather_rows(x, order, begin, end);
            const auto yb = detail::gather_labels(y, order, begin, end);

            const ForwardRecord fwd = forward(net, xb);
            const double primary = cross_entropy(fwd.output(), yb);
            Matrix delta = cross_entropy_softmax_delta(fwd.output(), yb);

            double snnl_sum = 0.0;
            std::unordered_map<int, Matrix> tap_grads;
            if (use_snnl && end - begin >= 2) {
                bool isolated = false;
                for (int tap : net.snnl_taps) {
                    auto fb = snnl_forward_backward(fwd.post[static_cast<std::size_t>(tap)], yb,
                                                    temperature);
                    snnl_sum += fb.value.loss;
                    isolated = fb.value.all_isolated;
                    tap_grads.emplace(tap, cfg.alpha * fb.grad);
                }
                if (isolated) ++rec.isolated_batches;
            }

            const NetGrads grads = backward(net, xb, fwd, delta, tap_grads);
            adam_step(net, grads, adam);

            rec.primary_loss += primary;
            rec.snnl_loss += snnl_sum;
            rec.total_loss += primary + cfg.alpha * snnl_sum;
        }
        rec.primary_loss /= static_cast<double>(batches);
        rec.snnl_loss /= static_cast<double>(batches);
        rec.total_loss /= static_cast<double>(batches);
        history.epochs.push_back(rec);
    }
    return history;
}

/// Minibatch Adam training of the autoencoder under binary cross-entropy
/// reconstruction. The companion loss attaches according to cfg.mode:
/// baseline ignores labels entirely; all_hidden taps every hidden layer and
/// the latent code; latent_partial taps only the first cfg.latent_units
/// latent coordinates.
inline TrainHistory train_autoencoder(Network& net, const Matrix& x, const std::vector<int>& y,
                                      const TrainConfig& cfg) {
    const auto n = static_cast<std::size_t>(x.rows());
    if (n == 0) throw std::invalid_argument("train_autoencoder: empty dataset");
    if (cfg.batch_size < 1) throw std::invalid_argument("train_autoencoder: batch_size must be >= 1");
    if (cfg.epochs < 1) throw std::invalid_argument("train_autoencoder: epochs must be >= 1");
    if (net.latent_layer < 0) throw std::invalid_argument("train_autoencoder: no latent layer");
    const bool use_snnl = cfg.alpha != 0.0 && cfg.mode != DisentMode::baseline;
    if (use_snnl && y.size() != n)
        throw std::invalid_argument("train_autoencoder: labels required for companion loss");

    const int latent = net.latent_layer;
    const auto last_hidden = static_cast<int>(net.size()) - 2;
    net.snnl_taps.clear();
    if (cfg.mode == DisentMode::all_hidden) {
        for (int l = 0; l <= last_hidden; ++l) net.snnl_taps.push_back(l);
    } else if (cfg.mode == DisentMode::latent_partial) {
        if (cfg.latent_units < 1)
            throw std::invalid_argument("train_autoencoder: latent_units must be >= 1");
        net.snnl_taps = {latent};
    }

    AdamState adam = make_adam_state(net, cfg.adam);
    TrainHistory history;
    const auto bs = static_cast<std::size_t>(cfg.batch_size);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double temperature = annealing_temperature(epoch, cfg.schedule);
        const auto order = detail::epoch_permutation(n, cfg.seed, epoch);
        EpochRecord rec;
        rec.epoch = epoch;
        rec.temperature = temperature;
        std::size_t batches = 0;
        for (std::size_t begin = 0; begin < n; begin += bs, ++batches) {
            const std::size_t end = std::min(begin + bs, n);
            const Matrix xb = detail::gather_rows(x, order, begin, end);

            const ForwardRecord fwd = forward(net, xb);
            const double primary = binary_cross_entropy(fwd.output(), xb);
            Matrix delta = bce_logistic_delta(fwd.output(), xb);

            double snnl_sum = 0.0;
            std::unordered_map<int, Matrix> tap_grads;
            if (use_snnl && end - begin >= 2) {
                const auto yb = detail::gather_labels(y, order, begin, end);
                bool isolated = false;
                if (cfg.mode == DisentMode::all_hidden) {
                    for (int tap : net.snnl_taps) {
                        auto fb = snnl_forward_backward(fwd.post[static_cast<std::size_t>(tap)],
                                                        yb, temperature);
                        snnl_sum += fb.value.loss;
                        isolated = fb.value.all_isolated;
                        tap_grads.emplace(tap, cfg.alpha * fb.grad);
                    }
                } else {
                    const Matrix& code = fwd.post[static_cast<std::size_t>(latent)];
                    const Index width = std::min(cfg.latent_units, code.cols());
                    auto fb = snnl_forward_backward(code.leftCols(width), yb, temperature);
                    snnl_sum += fb.value.loss;
                    isolated = fb.value.all_isolated;
                    Matrix g = Matrix::Zero(code.rows(), code.cols());
                    g.leftCols(width) = cfg.alpha * fb.grad;
                    tap_grads.emplace(latent, std::move(g));
                }
                if (isolated) ++rec.isolated_batches;
            }

            const NetGrads grads = backward(net, xb, fwd, delta, tap_grads);
            adam_step(net, grads, adam);

            rec.primary_loss += primary;
            rec.snnl_loss += snnl_sum;
            rec.total_loss += primary + cfg.alpha * snnl_sum;
        }
        rec.primary_loss /= static_cast<double>(batches);
        rec.snnl_loss /= static_cast<double>(batches);
        rec.total_loss /= static_cast<double>(batches);
        history.epochs.push_back(rec);
    }
    return history;
}

}  // namespace disent
