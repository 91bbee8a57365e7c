#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "disent/common.hpp"
#include "disent/nn.hpp"

namespace disent {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    struct Moments {
        Matrix mw, vw;
        Vector mb, vb;
    };
    std::vector<Moments> layers;
    long t = 0;
    AdamConfig cfg;
};

inline AdamState make_adam_state(const Network& net, const AdamConfig& cfg = {}) {
    AdamState state;
    state.cfg = cfg;
    state.layers.reserve(net.size());
    for (const auto& layer : net.layers)
        std::visit(
            [&](const auto& l) {
                AdamState::Moments m;
                m.mw = Matrix::Zero(l.w.rows(), l.w.cols());
                m.vw = Matrix::Zero(l.w.rows(), l.w.cols());
                m.mb = Vector::Zero(l.b.size());
                m.vb = Vector::Zero(l.b.size());
                state.layers.push_back(std::move(m));
            },
            layer);
    return state;
}

/// One bias-corrected Adam update applied in place.
inline void adam_step(Network& net, const NetGrads& grads, AdamState& state) {
    if (grads.layers.size() != net.size() || state.layers.size() != net.size())
        throw std::invalid_argument("adam_step: state/gradient shape mismatch");
    ++state.t;
    const auto& cfg = state.cfg;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    for (std::size_t l = 0; l < net.size(); ++l) {
        auto& mom = state.layers[l];
        const auto& g = grads.layers[l];
        std::visit(
            [&](auto& layer) {
                mom.mw = cfg.beta1 * mom.mw + (1.0 - cfg.beta1) * g.weights;
                mom.vw = cfg.beta2 * mom.vw.array().matrix() +
                         (1.0 - cfg.beta2) * g.weights.array().square().matrix();
                mom.mb = cfg.beta1 * mom.mb + (1.0 - cfg.beta1) * g.bias;
                mom.vb = cfg.beta2 * mom.vb.array().matrix() +
                         (1.0 - cfg.beta2) * g.bias.array().square().matrix();
                layer.w.array() -=
                    cfg.lr * (mom.mw.array() / bc1) / ((mom.vw.array() / bc2).sqrt() + cfg.eps);
                layer.b.array() -=
                    cfg.lr * (mom.mb.array() / bc1) / ((mom.vb.array() / bc2).sqrt() + cfg.eps);
            },
            net.layers[l]);
    }
}

}  // namespace disent
