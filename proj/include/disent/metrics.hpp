#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "disent/common.hpp"

namespace disent {

namespace detail {

inline int label_range(const std::vector<int>& labels, const char* what) {
    if (labels.empty()) throw std::invalid_argument(std::string(what) + ": empty label vector");
    int max_label = -1;
    for (int v : labels) {
        if (v < 0) throw std::invalid_argument(std::string(what) + ": negative label");
        max_label = std::max(max_label, v);
    }
    return max_label + 1;
}

}  // namespace detail

struct ContingencyTable {
    std::vector<std::vector<long>> counts;  // rows: first labeling, cols: second labeling
    std::vector<long> row_sums;
    std::vector<long> col_sums;
    long n = 0;
};

inline ContingencyTable build_contingency(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("build_contingency: label vectors differ in length");
    const int ra = detail::label_range(a, "build_contingency");
    const int rb = detail::label_range(b, "build_contingency");
    ContingencyTable t;
    t.counts.assign(static_cast<std::size_t>(ra), std::vector<long>(static_cast<std::size_t>(rb), 0));
    t.row_sums.assign(static_cast<std::size_t>(ra), 0);
    t.col_sums.assign(static_cast<std::size_t>(rb), 0);
    t.n = static_cast<long>(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        ++t.counts[static_cast<std::size_t>(a[i])][static_cast<std::size_t>(b[i])];
        ++t.row_sums[static_cast<std::size_t>(a[i])];
        ++t.col_sums[static_cast<std::size_t>(b[i])];
    }
    return t;
}

namespace detail {

// Per-cluster centroids; throws when a label in [0, k) has no members.
inline Matrix cluster_centroids(const Matrix& x, const std::vector<int>& labels, int k,
                                const char* what) {
    Matrix centroids = Matrix::Zero(k, x.cols());
    std::vector<long> counts(static_cast<std::size_t>(k), 0);
    for (Index i = 0; i < x.rows(); ++i) {
        const int c = labels[static_cast<std::size_t>(i)];
        centroids.row(c) += x.row(i);
        ++counts[static_cast<std::size_t>(c)];
    }
    for (int c = 0; c < k; ++c) {
        if (counts[static_cast<std::size_t>(c)] == 0)
            throw std::invalid_argument(std::string(what) + ": cluster " + std::to_string(c) +
                                        " is empty");
        centroids.row(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
    }
    return centroids;
}

inline void check_points_labels(const Matrix& x, const std::vector<int>& labels,
                                const char* what) {
    if (static_cast<std::size_t>(x.rows()) != labels.size())
        throw std::invalid_argument(std::string(what) + ": row/label count mismatch");
    if (!x.allFinite()) throw std::invalid_argument(std::string(what) + ": non-finite value");
}

}  // namespace detail

/// Davies-Bouldin index: mean over clusters of the worst ratio
/// (s_i + s_j) / d_ij, with s the mean distance to the centroid and d the
/// centroid separation. Lower is better. Coincident centroids are an error.
inline double davies_bouldin(const Matrix& x, const std::vector<int>& labels) {
    detail::check_points_labels(x, labels, "davies_bouldin");
    const int k = detail::label_range(labels, "davies_bouldin");
    if (k < 2) throw std::invalid_argument("davies_bouldin: need at least 2 clusters");
    const Matrix centroids = detail::cluster_centroids(x, labels, k, "davies_bouldin");

    Vector scatter = Vector::Zero(k);
    std::vector<long> counts(static_cast<std::size_t>(k), 0);
    for (Index i = 0; i < x.rows(); ++i) {
        const int c = labels[static_cast<std::size_t>(i)];
        scatter[c] += (x.row(i) - centroids.row(c)).norm();
        ++counts[static_cast<std::size_t>(c)];
    }
    for (int c = 0; c < k; ++c) scatter[c] /= static_cast<double>(counts[static_cast<std::size_t>(c)]);

    double total = 0.0;
    for (int i = 0; i < k; ++i) {
        double worst = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < k; ++j) {
            if (j == i) continue;
            const double sep = (centroids.row(i) - centroids.row(j)).norm();
            if (sep == 0.0)
                throw std::invalid_argument("davies_bouldin: coincident centroids " +
                                            std::to_string(i) + " and " + std::to_string(j));
            worst = std::max(worst, (scatter[i] + scatter[j]) / sep);
        }
        total += worst;
    }
    return total / static_cast<double>(k);
}

/// Mean silhouette coefficient with Euclidean distance. Points in singleton
/// clusters score 0.
inline double silhouette(const Matrix& x, const std::vector<int>& labels) {
    detail::check_points_labels(x, labels, "silhouette");
    const int k = detail::label_range(labels, "silhouette");
    if (k < 2) throw std::invalid_argument("silhouette: need at least 2 clusters");
    const Index n = x.rows();
    std::vector<long> counts(static_cast<std::size_t>(k), 0);
    for (int c : labels) ++counts[static_cast<std::size_t>(c)];
    for (int c = 0; c < k; ++c)
        if (counts[static_cast<std::size_t>(c)] == 0)
            throw std::invalid_argument("silhouette: cluster " + std::to_string(c) + " is empty");

    double total = 0.0;
    std::vector<double> dist_sums(static_cast<std::size_t>(k));
    for (Index i = 0; i < n; ++i) {
        const int own = labels[static_cast<std::size_t>(i)];
        if (counts[static_cast<std::size_t>(own)] == 1) continue;  // singleton scores 0
        std::fill(dist_sums.begin(), dist_sums.end(), 0.0);
        for (Index j = 0; j < n; ++j) {
            if (j == i) continue;
            dist_sums[static_cast<std::size_t>(labels[static_cast<std::size_t>(j)])] +=
                (x.row(i) - x.row(j)).norm();
        }
        const double a =
            dist_sums[static_cast<std::size_t>(own)] /
            static_cast<double>(counts[static_cast<std::size_t>(own)] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (int c = 0; c < k; ++c) {
            if (c == own) continue;
            b = std::min(b, dist_sums[static_cast<std::size_t>(c)] /
                                static_cast<double>(counts[static_cast<std::size_t>(c)]));
        }
        const double denom = std::max(a, b);
        total += denom > 0.0 ? (b - a) / denom : 0.0;
    }
    return total / static_cast<double>(n);
}

/// Calinski-Harabasz score: between/within dispersion ratio scaled by
/// (N - k) / (k - 1). Higher is better. Zero within-cluster dispersion is an
/// error.
inline double calinski_harabasz(const Matrix& x, const std::vector<int>& labels) {
    detail::check_points_labels(x, labels, "calinski_harabasz");
    const int k = detail::label_range(labels, "calinski_harabasz");
    if (k < 2) throw std::invalid_argument("calinski_harabasz: need at least 2 clusters");
    const Index n = x.rows();
    if (n <= k) throw std::invalid_argument("calinski_harabasz: need more points than clusters");
    const Matrix centroids = detail::cluster_centroids(x, labels, k, "calinski_harabasz");
    const Vector mean = x.colwise().mean();

    double within = 0.0;
    std::vector<long> counts(static_cast<std::size_t>(k), 0);
    for (Index i = 0; i < n; ++i) {
        const int c = labels[static_cast<std::size_t>(i)];
        within += (x.row(i) - centroids.row(c)).squaredNorm();
        ++counts[static_cast<std::size_t>(c)];
    }
    if (within == 0.0)
        throw std::invalid_argument("calinski_harabasz: zero within-cluster dispersion");
    double between = 0.0;
    for (int c = 0; c < k; ++c)
        between += static_cast<double>(counts[static_cast<std::size_t>(c)]) *
                   (centroids.row(c) - mean.transpose()).squaredNorm();
    return (between / within) * static_cast<double>(n - k) / static_cast<double>(k - 1);
}

/// Normalized mutual information 2 I(a; b) / (H(a) + H(b)) with natural
/// logarithms. When both labelings are single-cluster the score is 1.
inline double nmi(const std::vector<int>& a, const std::vector<int>& b) {
    const ContingencyTable t = build_contingency(a, b);
    const auto n = static_cast<double>(t.n);
    double ha = 0.0, hb = 0.0, mi = 0.0;
    for (long r : t.row_sums)
        if (r > 0) ha -= (r / n) * std::log(r / n);
    for (long c : t.col_sums)
        if (c > 0) hb -= (c / n) * std::log(c / n);
    for (std::size_t i = 0; i < t.counts.size(); ++i)
        for (std::size_t j = 0; j < t.counts[i].size(); ++j) {
            const long nij = t.counts[i][j];
            if (nij == 0) continue;
            mi += (nij / n) *
                  std::log(n * static_cast<double>(nij) /
                           (static_cast<double>(t.row_sums[i]) * static_cast<double>(t.col_sums[j])));
        }
    if (ha == 0.0 && hb == 0.0) return 1.0;
    return 2.0 * mi / (ha + hb);
}

/// Adjusted Rand index via the contingency-table closed form. Degenerate
/// cases where the expected index equals the maximum index score 1.
inline double adjusted_rand(const std::vector<int>& a, const std::vector<int>& b) {
    const ContingencyTable t = build_contingency(a, b);
    if (t.n < 2) throw std::invalid_argument("adjusted_rand: need at least 2 points");
    auto comb2 = [](double v) { return v * (v - 1.0) / 2.0; };
    double sum_ij = 0.0, sum_a = 0.0, sum_b = 0.0;
    for (std::size_t i = 0; i < t.counts.size(); ++i)
        for (long nij : t.counts[i]) sum_ij += comb2(static_cast<double>(nij));
    for (long r : t.row_sums) sum_a += comb2(static_cast<double>(r));
    for (long c : t.col_sums) sum_b += comb2(static_cast<double>(c));
    // numerator and denominator scaled through by comb2(n): exact for small
    // counts, identical ratio otherwise
    const double total = comb2(static_cast<double>(t.n));
    const double numerator = total * sum_ij - sum_a * sum_b;
    const double denominator = total * 0.5 * (sum_a + sum_b) - sum_a * sum_b;
    if (denominator == 0.0) return 1.0;  // expected index equals maximum index
    return numerator / denominator;
}

/// Clustering accuracy: the best achievable accuracy over all one-to-one
/// cluster-to-class relabelings, found by exhaustive permutation search.
/// Limited to at most 8 distinct labels.
inline double clustering_accuracy(const std::vector<int>& truth, const std::vector<int>& pred) {
    const ContingencyTable t = build_contingency(truth, pred);
    const std::size_t k = std::max(t.row_sums.size(), t.col_sums.size());
    if (k > 8)
        throw std::invalid_argument(
            "clustering_accuracy: more than 8 labels; permutation search not feasible");
    std::vector<std::size_t> perm(k);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    long best = 0;
    do {
        long matched = 0;
        for (std::size_t col = 0; col < k; ++col) {
            const std::size_t row = perm[col];
            if (row < t.counts.size() && col < t.col_sums.size()) matched += t.counts[row][col];
        }
        best = std::max(best, matched);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return static_cast<double>(best) / static_cast<double>(t.n);
}

struct ClassificationMetrics {
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    double weighted_f1 = 0.0;
    std::vector<double> per_class_f1;
};

/// Accuracy plus macro and support-weighted F1 over `num_classes` classes.
/// A class with zero precision + recall contributes an F1 of 0; macro
/// averaging is uniform over all `num_classes` classes.
inline ClassificationMetrics classification_metrics(const std::vector<int>& truth,
                                                    const std::vector<int>& pred,
                                                    int num_classes) {
    if (truth.size() != pred.size())
        throw std::invalid_argument("classification_metrics: size mismatch");
    if (truth.empty()) throw std::invalid_argument("classification_metrics: empty input");
    if (num_classes < 1) throw std::invalid_argument("classification_metrics: num_classes < 1");
    for (std::size_t i = 0; i < truth.size(); ++i)
        if (truth[i] < 0 || truth[i] >= num_classes || pred[i] < 0 || pred[i] >= num_classes)
            throw std::invalid_argument("classification_metrics: label out of range at index " +
                                        std::to_string(i));

    const auto kc = static_cast<std::size_t>(num_classes);
    std::vector<long> tp(kc, 0), fp(kc, 0), fn(kc, 0), support(kc, 0);
    long correct = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const auto t = static_cast<std::size_t>(truth[i]);
        const auto p = static_cast<std::size_t>(pred[i]);
        ++support[t];
        if (t == p) {
            ++tp[t];
            ++correct;
        } else {
            ++fn[t];
            ++fp[p];
        }
    }

    ClassificationMetrics out;
    out.accuracy = static_cast<double>(correct) / static_cast<double>(truth.size());
    out.per_class_f1.resize(kc, 0.0);
    double weighted = 0.0;
    double macro = 0.0;
    for (std::size_t c = 0; c < kc; ++c) {
        const double prec = tp[c] + fp[c] > 0
                                ? static_cast<double>(tp[c]) / static_cast<double>(tp[c] + fp[c])
                                : 0.0;
        const double rec = tp[c] + fn[c] > 0
                               ? static_cast<double>(tp[c]) / static_cast<double>(tp[c] + fn[c])
                               : 0.0;
        const double f1 = prec + rec > 0.0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
        out.per_class_f1[c] = f1;
        macro += f1;
        weighted += f1 * static_cast<double>(support[c]);
    }
    out.macro_f1 = macro / static_cast<double>(kc);
    out.weighted_f1 = weighted / static_cast<double>(truth.size());
    return out;
}

}  // namespace disent
