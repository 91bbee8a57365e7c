#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "disent/common.hpp"

namespace disent {

/// Floor applied to every log argument in the primary losses.
inline constexpr double kLossLogFloor = 1e-30;

inline Matrix one_hot(const std::vector<int>& labels, Index num_classes) {
    Matrix y = Matrix::Zero(static_cast<Index>(labels.size()), num_classes);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= num_classes)
            throw std::invalid_argument("one_hot: label " + std::to_string(labels[i]) +
                                        " out of range [0, " + std::to_string(num_classes) + ")");
        y(static_cast<Index>(i), labels[i]) = 1.0;
    }
    return y;
}

/// Mean categorical cross-entropy over the batch. `probs` holds one
/// distribution per row (e.g. softmax output).
inline double cross_entropy(const Matrix& probs, const std::vector<int>& labels) {
    if (probs.rows() != static_cast<Index>(labels.size()))
        throw std::invalid_argument("cross_entropy: batch/label size mismatch");
    double total = 0.0;
    for (Index i = 0; i < probs.rows(); ++i) {
        const int y = labels[static_cast<std::size_t>(i)];
        if (y < 0 || y >= probs.cols())
            throw std::invalid_argument("cross_entropy: label out of range at row " +
                                        std::to_string(i));
        total -= std::log(std::max(probs(i, y), kLossLogFloor));
    }
    return total / static_cast<double>(probs.rows());
}

/// Gradient of mean cross-entropy with respect to softmax *pre-activations*:
/// (p - y) / b. Pairing the two analytically avoids the unstable softmax
/// Jacobian product.
inline Matrix cross_entropy_softmax_delta(const Matrix& probs, const std::vector<int>& labels) {
    if (probs.rows() != static_cast<Index>(labels.size()))
        throw std::invalid_argument("cross_entropy_softmax_delta: batch/label size mismatch");
    Matrix delta = probs;
    for (Index i = 0; i < probs.rows(); ++i) {
        const int y = labels[static_cast<std::size_t>(i)];
        if (y < 0 || y >= probs.cols())
            throw std::invalid_argument("cross_entropy_softmax_delta: label out of range at row " +
                                        std::to_string(i));
        delta(i, y) -= 1.0;
    }
    return delta / static_cast<double>(probs.rows());
}

/// Mean binary cross-entropy, averaged over batch rows (summed over features
/// within a row). Targets must lie in [0, 1].
inline double binary_cross_entropy(const Matrix& recon, const Matrix& target) {
    if (recon.rows() != target.rows() || recon.cols() != target.cols())
        throw std::invalid_argument("binary_cross_entropy: shape mismatch");
    if ((target.array() < 0.0).any() || (target.array() > 1.0).any())
        throw std::invalid_argument("binary_cross_entropy: target outside [0, 1]");
    double total = 0.0;
    for (Index i = 0; i < recon.rows(); ++i)
        for (Index j = 0; j < recon.cols(); ++j) {
            const double r = recon(i, j);
            const double x = target(i, j);
            total -= x * std::log(std::max(r, kLossLogFloor)) +
                     (1.0 - x) * std::log(std::max(1.0 - r, kLossLogFloor));
        }
    return total / static_cast<double>(recon.rows());
}

/// Gradient of mean binary cross-entropy with respect to logistic
/// *pre-activations*: (r - x) / b.
inline Matrix bce_logistic_delta(const Matrix& recon, const Matrix& target) {
    if (recon.rows() != target.rows() || recon.cols() != target.cols())
        throw std::invalid_argument("bce_logistic_delta: shape mismatch");
    return (recon - target) / static_cast<double>(recon.rows());
}

}  // namespace disent
