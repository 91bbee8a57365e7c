#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "disent/common.hpp"

namespace disent {

/// Numerical guard added to the neighborhood sums before the ratio.
inline constexpr double kSnnlEpsilon = 1e-8;
/// Floor applied to every log argument.
inline constexpr double kSnnlLogFloor = 1e-30;

/// Annealing schedule T(i) = 1 / (eta + i)^gamma over epoch index i.
struct TemperatureSchedule {
    double eta = 1.0;
    double gamma = 0.55;
};

inline double annealing_temperature(int epoch, const TemperatureSchedule& s = {}) {
    if (epoch < 0) throw std::invalid_argument("annealing_temperature: negative epoch");
    if (s.eta < 1.0) throw std::invalid_argument("annealing_temperature: eta must be >= 1");
    if (s.gamma <= 0.0) throw std::invalid_argument("annealing_temperature: gamma must be > 0");
    return 1.0 / std::pow(s.eta + static_cast<double>(epoch), s.gamma);
}

/// Pairwise cosine distance d_ij = 1 - cos(x_i, x_j), plus the row-normalized
/// matrix and row norms needed for the backward pass. The distance matrix is
/// exactly symmetric with an exactly zero diagonal.
struct CosineDistance {
    Matrix d;      // b x b distances
    Matrix xhat;   // b x d row-normalized inputs
    Vector norms;  // b row norms of the input
};

inline CosineDistance pairwise_cosine_distance(const Matrix& x) {
    const Index b = x.rows();
    CosineDistance out;
    out.norms = x.rowwise().norm();
    for (Index i = 0; i < b; ++i)
        if (out.norms[i] == 0.0)
            throw std::invalid_argument("pairwise_cosine_distance: zero-norm row " +
                                        std::to_string(i));
    out.xhat = x.array().colwise() / out.norms.array();
    // One symmetric rank update instead of b^2 strided row dots; mirroring the
    // computed triangle keeps the matrix symmetric by construction.
    Matrix sim = Matrix::Zero(b, b);
    sim.selfadjointView<Eigen::Lower>().rankUpdate(out.xhat);
    out.d = sim.selfadjointView<Eigen::Lower>();
    out.d.array() = 1.0 - out.d.array();
    out.d.diagonal().setZero();
    return out;
}

struct SnnlResult {
    double loss = 0.0;
    bool all_isolated = false;  // no point had a same-class neighbor
};

namespace detail {

struct SnnlCore {
    CosineDistance cos;
    Matrix w;    // exp(-d/T), zero diagonal
    Vector num;  // same-class neighborhood sums (no epsilon)
    Vector den;  // all-neighbor sums (no epsilon)
    double inv_bt = 0.0;  // 1 / (b * T)
};

inline SnnlCore snnl_core(const Matrix& x, const std::vector<int>& y, double temperature) {
    const Index b = x.rows();
    if (b < 2) throw std::invalid_argument("snnl: batch must contain at least 2 points");
    if (static_cast<Index>(y.size()) != b)
        throw std::invalid_argument("snnl: label count does not match batch size");
    if (!(temperature > 0.0)) throw std::invalid_argument("snnl: temperature must be positive");

    SnnlCore core;
    core.inv_bt = 1.0 / (static_cast<double>(b) * temperature);
    core.cos = pairwise_cosine_distance(x);
    core.w = (-core.cos.d / temperature).array().exp();
    core.w.diagonal().setZero();
    core.num = Vector::Zero(b);
    core.den = Vector::Zero(b);
    for (Index i = 0; i < b; ++i) {
        for (Index j = 0; j < b; ++j) {
            if (j == i) continue;
            core.den[i] += core.w(i, j);
            if (y[static_cast<std::size_t>(j)] == y[static_cast<std::size_t>(i)])
                core.num[i] += core.w(i, j);
        }
    }
    return core;
}

inline SnnlResult snnl_loss_from_core(const SnnlCore& core, const std::vector<int>& y) {
    const Index b = core.w.rows();
    SnnlResult result;
    result.all_isolated = true;
    double total = 0.0;
    for (Index i = 0; i < b; ++i) {
        bool isolated = true;
        for (Index j = 0; j < b; ++j)
            if (j != i && y[static_cast<std::size_t>(j)] == y[static_cast<std::size_t>(i)]) {
                isolated = false;
                break;
            }
        if (!isolated) result.all_isolated = false;
        const double ratio = (core.num[i] + kSnnlEpsilon) / (core.den[i] + kSnnlEpsilon);
        total += std::log(std::max(ratio, kSnnlLogFloor));
    }
    result.loss = -total / static_cast<double>(b);
    return result;
}

inline Matrix snnl_grad_from_core(const SnnlCore& core, const std::vector<int>& y) {
    const Index b = core.w.rows();

    // dL/dd_ij for ordered pairs (the log floor never binds: the ratio is at
    // least epsilon / (den + epsilon), far above the floor, so the guarded
    // ratio is what gets differentiated).
    Matrix g = Matrix::Zero(b, b);
    const double scale = core.inv_bt;
    for (Index i = 0; i < b; ++i) {
        const double inv_num = 1.0 / (core.num[i] + kSnnlEpsilon);
        const double inv_den = 1.0 / (core.den[i] + kSnnlEpsilon);
        for (Index j = 0; j < b; ++j) {
            if (j == i) continue;
            const bool same = y[static_cast<std::size_t>(j)] == y[static_cast<std::size_t>(i)];
            g(i, j) = scale * core.w(i, j) * ((same ? inv_num : 0.0) - inv_den);
        }
    }

    // d_ij = 1 - xhat_i . xhat_j, so dL/dxhat = -(G + G^T) xhat.
    const Matrix grad_xhat = -(g + g.transpose()) * core.cos.xhat;

    // Project through the row normalization xhat_i = x_i / ||x_i||.
    const Vector dots = (grad_xhat.array() * core.cos.xhat.array()).rowwise().sum().matrix();
    Matrix grad = grad_xhat - dots.asDiagonal() * core.cos.xhat;
    grad.array().colwise() /= core.cos.norms.array();
    return grad;
}

}  // namespace detail

/// Soft nearest neighbor loss over a batch (rows of x) with integer labels.
inline SnnlResult snnl_forward(const Matrix& x, const std::vector<int>& y, double temperature) {
    return detail::snnl_loss_from_core(detail::snnl_core(x, y, temperature), y);
}

/// Analytic gradient of the loss with respect to the raw inputs x.
inline Matrix snnl_gradient(const Matrix& x, const std::vector<int>& y, double temperature) {
    return detail::snnl_grad_from_core(detail::snnl_core(x, y, temperature), y);
}

/// Loss and gradient from a single shared evaluation of the batch geometry.
struct SnnlForwardBackward {
    SnnlResult value;
    Matrix grad;
};

inline SnnlForwardBackward snnl_forward_backward(const Matrix& x, const std::vector<int>& y,
                                                 double temperature) {
    const auto core = detail::snnl_core(x, y, temperature);
    SnnlForwardBackward out;
    out.value = detail::snnl_loss_from_core(core, y);
    out.grad = detail::snnl_grad_from_core(core, y);
    return out;
}

}  // namespace disent
