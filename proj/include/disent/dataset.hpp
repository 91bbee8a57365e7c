#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "disent/common.hpp"

namespace disent {

/// Per-feature (min, max) pairs recorded when a dataset was scaled.
struct MinMaxScaler {
    Vector min;
    Vector max;

    Index dim() const { return min.size(); }
};

/// Row-major matrix of sentence embeddings plus integer class labels; the
/// universal currency between modules.
struct EmbeddedDataset {
    Matrix features;            // n x d
    std::vector<int> labels;    // n class indices
    std::optional<MinMaxScaler> scaler;

    Index rows() const { return features.rows(); }
    Index dim() const { return features.cols(); }
};

inline void validate_dataset(const EmbeddedDataset& ds) {
    if (static_cast<Index>(ds.labels.size()) != ds.features.rows())
        throw std::invalid_argument("dataset: feature rows (" + std::to_string(ds.features.rows()) +
                                    ") != label count (" + std::to_string(ds.labels.size()) + ")");
    if (!ds.features.allFinite())
        throw std::invalid_argument("dataset: non-finite feature value");
    if (ds.scaler) {
        if (ds.scaler->dim() != ds.features.cols())
            throw std::invalid_argument("dataset: scaler dimensionality mismatch");
        if (ds.features.size() > 0 &&
            (ds.features.minCoeff() < 0.0 || ds.features.maxCoeff() > 1.0))
            throw std::invalid_argument("dataset: scaled features outside [0,1]");
    }
}

/// Applies a recorded scaler to new data; results are clamped into [0,1].
inline Matrix apply_scaler(const MinMaxScaler& scaler, const Matrix& x) {
    if (x.cols() != scaler.dim())
        throw std::invalid_argument("apply_scaler: data has " + std::to_string(x.cols()) +
                                    " columns, scaler has " + std::to_string(scaler.dim()));
    Matrix out(x.rows(), x.cols());
    for (Index j = 0; j < x.cols(); ++j) {
        const double lo = scaler.min[j], hi = scaler.max[j];
        if (hi > lo) {
            out.col(j) = ((x.col(j).array() - lo) / (hi - lo)).cwiseMax(0.0).cwiseMin(1.0);
        } else {
            out.col(j).setConstant(0.5);  // constant column in the fit data
        }
    }
    return out;
}

/// Inverse of apply_scaler on unclamped in-range data.
inline Matrix invert_scaler(const MinMaxScaler& scaler, const Matrix& scaled) {
    if (scaled.cols() != scaler.dim())
        throw std::invalid_argument("invert_scaler: dimensionality mismatch");
    Matrix out(scaled.rows(), scaled.cols());
    for (Index j = 0; j < scaled.cols(); ++j) {
        const double lo = scaler.min[j], hi = scaler.max[j];
        out.col(j) = scaled.col(j).array() * (hi - lo) + lo;
    }
    return out;
}

/// Fits per-column (min, max) on the dataset and maps each column to [0,1].
/// Constant columns map to 0.5.
inline EmbeddedDataset minmax_scale(const EmbeddedDataset& ds) {
    if (!ds.features.allFinite())
        throw std::invalid_argument("minmax_scale: non-finite feature value");
    MinMaxScaler scaler;
    scaler.min = ds.features.colwise().minCoeff();
    scaler.max = ds.features.colwise().maxCoeff();
    EmbeddedDataset out;
    out.features = apply_scaler(scaler, ds.features);
    out.labels = ds.labels;
    out.scaler = scaler;
    return out;
}

namespace detail {

inline void write_u32(std::ostream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline void write_f32(std::ostream& os, float v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline std::uint32_t read_u32(std::istream& is) {
    std::uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}
inline float read_f32(std::istream& is) {
    float v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}

}  // namespace detail

// Embedding cache: "EMB1", u32 n, u32 d, u8 scaled-flag, n*d little-endian
// f32 features (row-major), n u32 labels, then (if scaled) d f32 mins and
// d f32 maxs.
inline void write_cache(const EmbeddedDataset& ds, const std::string& path) {
    validate_dataset(ds);
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open cache for writing: " + path);
    os.write("EMB1", 4);
    detail::write_u32(os, static_cast<std::uint32_t>(ds.rows()));
    detail::write_u32(os, static_cast<std::uint32_t>(ds.dim()));
    const char scaled = ds.scaler ? 1 : 0;
    os.write(&scaled, 1);
    for (Index i = 0; i < ds.rows(); ++i)
        for (Index j = 0; j < ds.dim(); ++j)
            detail::write_f32(os, static_cast<float>(ds.features(i, j)));
    for (int label : ds.labels) {
        if (label < 0) throw std::invalid_argument("write_cache: negative label");
        detail::write_u32(os, static_cast<std::uint32_t>(label));
    }
    if (ds.scaler) {
        for (Index j = 0; j < ds.dim(); ++j) detail::write_f32(os, static_cast<float>(ds.scaler->min[j]));
        for (Index j = 0; j < ds.dim(); ++j) detail::write_f32(os, static_cast<float>(ds.scaler->max[j]));
    }
    if (!os) throw std::runtime_error("write failed: " + path);
}

inline EmbeddedDataset read_cache(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open cache: " + path);
    char magic[4] = {};
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "EMB1", 4) != 0)
        throw std::runtime_error("not an embedding cache (bad magic): " + path);
    const std::uint32_t n = detail::read_u32(is);
    const std::uint32_t d = detail::read_u32(is);
    char scaled = 0;
    is.read(&scaled, 1);
    EmbeddedDataset ds;
    ds.features.resize(n, d);
    for (std::uint32_t i = 0; i < n; ++i)
        for (std::uint32_t j = 0; j < d; ++j)
            ds.features(i, j) = static_cast<double>(detail::read_f32(is));
    ds.labels.resize(n);
    for (std::uint32_t i = 0; i < n; ++i)
        ds.labels[i] = static_cast<int>(detail::read_u32(is));
    if (scaled) {
        MinMaxScaler scaler;
        scaler.min.resize(d);
        scaler.max.resize(d);
        for (std::uint32_t j = 0; j < d; ++j) scaler.min[j] = static_cast<double>(detail::read_f32(is));
        for (std::uint32_t j = 0; j < d; ++j) scaler.max[j] = static_cast<double>(detail::read_f32(is));
        ds.scaler = std::move(scaler);
    }
    if (!is) throw std::runtime_error("truncated embedding cache: " + path);
    validate_dataset(ds);
    return ds;
}

}  // namespace disent
