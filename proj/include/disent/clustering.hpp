#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "disent/common.hpp"

namespace disent {

struct ClusterResult {
    std::vector<int> assignments;
    Matrix centroids;  // k x d
    double inertia = 0.0;
    int iterations = 0;
};

namespace detail {

inline Index nearest_centroid(const Matrix& centroids, const Vector& point, double* dist2_out) {
    Index best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (Index c = 0; c < centroids.rows(); ++c) {
        const double d2 = (centroids.row(c).transpose() - point).squaredNorm();
        if (d2 < best_d2) {
            best_d2 = d2;
            best = c;
        }
    }
    if (dist2_out) *dist2_out = best_d2;
    return best;
}

// k-means++ seeding: first centroid uniform, then proportional to the squared
// distance to the nearest chosen centroid (cumulative-sum inversion so the
// sampling is pinned by this code, not a distribution object).
inline Matrix kmeanspp_seed(const Matrix& x, Index k, std::mt19937_64& rng) {
    const Index n = x.rows();
    Matrix centroids(k, x.cols());
    std::uniform_int_distribution<Index> uniform_idx(0, n - 1);
    centroids.row(0) = x.row(uniform_idx(rng));
    Vector d2 = Vector::Constant(n, std::numeric_limits<double>::infinity());
    for (Index c = 1; c < k; ++c) {
        for (Index i = 0; i < n; ++i)
            d2[i] = std::min(d2[i], (x.row(i) - centroids.row(c - 1)).squaredNorm());
        const double total = d2.sum();
        Index chosen;
        if (total <= 0.0) {
            chosen = uniform_idx(rng);  // all points coincide with a centroid
        } else {
            std::uniform_real_distribution<double> u(0.0, total);
            const double target = u(rng);
            double cum = 0.0;
            chosen = n - 1;
            for (Index i = 0; i < n; ++i) {
                cum += d2[i];
                if (target < cum) {
                    chosen = i;
                    break;
                }
            }
        }
        centroids.row(c) = x.row(chosen);
    }
    return centroids;
}

}  // namespace detail

/// Lloyd's algorithm with k-means++ seeding. Converges when the relative
/// inertia improvement drops below `tol` or after `max_iter` sweeps. Empty
/// clusters are repaired by stealing the point currently farthest from its
/// assigned centroid. Deterministic for a fixed seed.
inline ClusterResult kmeans(const Matrix& x, int k, std::uint64_t seed, int max_iter = 300,
                            double tol = 1e-4) {
    const Index n = x.rows();
    if (k < 1) throw std::invalid_argument("kmeans: k must be >= 1");
    if (n < k) throw std::invalid_argument("kmeans: fewer points (" + std::to_string(n) +
                                           ") than clusters (" + std::to_string(k) + ")");
    if (!x.allFinite()) throw std::invalid_argument("kmeans: non-finite feature value");

    auto rng = make_rng(seed);
    ClusterResult result;
    result.centroids = detail::kmeanspp_seed(x, k, rng);
    result.assignments.assign(static_cast<std::size_t>(n), 0);

    double prev_inertia = std::numeric_limits<double>::infinity();
    for (int iter = 1; iter <= max_iter; ++iter) {
        result.iterations = iter;

        // Assignment sweep (ties resolve to the lowest centroid index).
        Vector dist2(n);
        for (Index i = 0; i < n; ++i) {
            double d2 = 0.0;
            result.assignments[static_cast<std::size_t>(i)] =
                static_cast<int>(detail::nearest_centroid(result.centroids, x.row(i).transpose(), &d2));
            dist2[i] = d2;
        }

        // Repair empty clusters with the globally farthest point.
        std::vector<Index> counts(static_cast<std::size_t>(k), 0);
        for (int a : result.assignments) ++counts[static_cast<std::size_t>(a)];
        for (Index c = 0; c < k; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0) continue;
            Index worst = -1;
            double worst_d2 = -1.0;
            for (Index i = 0; i < n; ++i) {
                const auto a = static_cast<std::size_t>(result.assignments[static_cast<std::size_t>(i)]);
                if (counts[a] <= 1) continue;  // do not empty another cluster
                if (dist2[i] > worst_d2) {
                    worst_d2 = dist2[i];
                    worst = i;
                }
            }
            if (worst < 0) throw std::runtime_error("kmeans: cannot repair empty cluster");
            --counts[static_cast<std::size_t>(result.assignments[static_cast<std::size_t>(worst)])];
            result.assignments[static_cast<std::size_t>(worst)] = static_cast<int>(c);
            counts[static_cast<std::size_t>(c)] = 1;
            dist2[worst] = 0.0;
        }

        // Update sweep.
        Matrix sums = Matrix::Zero(k, x.cols());
        for (Index i = 0; i < n; ++i)
            sums.row(result.assignments[static_cast<std::size_t>(i)]) += x.row(i);
        for (Index c = 0; c < k; ++c)
            result.centroids.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);

        double inertia = 0.0;
        for (Index i = 0; i < n; ++i)
            inertia +=
                (x.row(i) - result.centroids.row(result.assignments[static_cast<std::size_t>(i)]))
                    .squaredNorm();
        result.inertia = inertia;

        if (std::isfinite(prev_inertia)) {
            const double denom = std::max(prev_inertia, 1e-300);
            if (std::abs(prev_inertia - inertia) / denom < tol) break;
        }
        prev_inertia = inertia;
    }
    return result;
}

struct PcaResult {
    Matrix projected;    // n x dims
    Matrix basis;        // d x dims, columns are principal axes
    Vector mean;         // column means used for centering
    Vector eigenvalues;  // descending, one per kept component
};

/// Exact PCA via eigendecomposition of the sample covariance. Components are
/// ordered by descending eigenvalue; each axis is oriented so its
/// largest-magnitude coordinate is positive.
inline PcaResult pca_project(const Matrix& x, Index dims) {
    const Index n = x.rows();
    const Index d = x.cols();
    if (n < 2) throw std::invalid_argument("pca_project: need at least 2 rows");
    if (dims < 1 || dims > d)
        throw std::invalid_argument("pca_project: dims must lie in [1, " + std::to_string(d) + "]");
    if (!x.allFinite()) throw std::invalid_argument("pca_project: non-finite feature value");

    PcaResult out;
    out.mean = x.colwise().mean();
    const Matrix centered = x.rowwise() - out.mean.transpose();
    const Matrix cov = centered.transpose() * centered / static_cast<double>(n - 1);
    Eigen::SelfAdjointEigenSolver<Matrix> solver(cov);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("pca_project: eigendecomposition failed");

    out.basis.resize(d, dims);
    out.eigenvalues.resize(dims);
    for (Index c = 0; c < dims; ++c) {
        const Index src = d - 1 - c;  // solver returns ascending eigenvalues
        Vector axis = solver.eigenvectors().col(src);
        Index pivot = 0;
        for (Index r = 1; r < d; ++r)
            if (std::abs(axis[r]) > std::abs(axis[pivot])) pivot = r;
        if (axis[pivot] < 0.0) axis = -axis;
        out.basis.col(c) = axis;
        out.eigenvalues[c] = solver.eigenvalues()[src];
    }
    out.projected = centered * out.basis;
    return out;
}

}  // namespace disent
