#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "disent/common.hpp"

namespace disent {

enum class Activation : std::uint8_t {
    identity = 0,
    relu = 1,
    logistic = 2,
    softmax = 3,
};

inline Matrix apply_activation(const Matrix& pre, Activation act) {
    switch (act) {
        case Activation::identity:
            return pre;
        case Activation::relu:
            return pre.cwiseMax(0.0);
        case Activation::logistic:
            return (1.0 / (1.0 + (-pre.array()).exp())).matrix();
        case Activation::softmax: {
            Matrix out(pre.rows(), pre.cols());
            for (Index i = 0; i < pre.rows(); ++i) {
                const double m = pre.row(i).maxCoeff();
                Eigen::ArrayXd e = (pre.row(i).array() - m).exp();
                out.row(i) = (e / e.sum()).matrix();
            }
            return out;
        }
    }
    throw std::invalid_argument("apply_activation: unknown activation");
}

/// Elementwise factor act'(pre) expressed through the post-activation values.
/// Softmax has no elementwise derivative; it must be fused with its loss.
inline Matrix activation_derivative(const Matrix& post, Activation act) {
    switch (act) {
        case Activation::identity:
            return Matrix::Ones(post.rows(), post.cols());
        case Activation::relu:
            return (post.array() > 0.0).cast<double>().matrix();
        case Activation::logistic:
            return (post.array() * (1.0 - post.array())).matrix();
        case Activation::softmax:
            throw std::invalid_argument(
                "activation_derivative: softmax must be fused with its loss");
    }
    throw std::invalid_argument("activation_derivative: unknown activation");
}

struct DenseLayer {
    Matrix w;  // fan_in x fan_out
    Vector b;  // fan_out
    Activation act = Activation::identity;

    Index fan_in() const { return w.rows(); }
    Index fan_out() const { return w.cols(); }
};

/// 1-D convolution over channel-major flattened signals: feature index
/// c * length + t. Weights are stored as an (in_channels * kernel_width) x
/// out_channels matrix so forward/backward are im2col matrix products.
struct Conv1dLayer {
    Matrix w;  // (ic * kw) x oc
    Vector b;  // oc
    Activation act = Activation::identity;
    Index in_channels = 1;
    Index kernel_width = 1;
    Index stride = 1;

    Index out_channels() const { return w.cols(); }
    Index output_length(Index input_length) const {
        if (input_length < kernel_width)
            throw std::invalid_argument("conv1d: input length " + std::to_string(input_length) +
                                        " shorter than kernel width " +
                                        std::to_string(kernel_width));
        return (input_length - kernel_width) / stride + 1;
    }
};

using Layer = std::variant<DenseLayer, Conv1dLayer>;

inline Index layer_input_dim(const Layer& layer) {
    if (const auto* d = std::get_if<DenseLayer>(&layer)) return d->fan_in();
    return -1;  // conv accepts any length >= kernel width
}

inline Index layer_output_dim(const Layer& layer, Index input_dim) {
    if (const auto* d = std::get_if<DenseLayer>(&layer)) {
        if (input_dim != d->fan_in())
            throw std::invalid_argument("dense layer expects " + std::to_string(d->fan_in()) +
                                        " inputs, got " + std::to_string(input_dim));
        return d->fan_out();
    }
    const auto& c = std::get<Conv1dLayer>(layer);
    if (input_dim % c.in_channels != 0)
        throw std::invalid_argument("conv1d: input dim not divisible by channel count");
    return c.out_channels() * c.output_length(input_dim / c.in_channels);
}

inline Activation layer_activation(const Layer& layer) {
    return std::visit([](const auto& l) { return l.act; }, layer);
}

struct Network {
    std::vector<Layer> layers;
    std::vector<int> snnl_taps;  // layer indices whose post-activations feed the companion loss
    int latent_layer = -1;       // encoder output layer for autoencoders

    std::size_t size() const { return layers.size(); }
};

inline Index output_dim(const Network& net, Index input_dim) {
    Index d = input_dim;
    for (const auto& layer : net.layers) d = layer_output_dim(layer, d);
    return d;
}

inline std::size_t parameter_count(const Network& net) {
    std::size_t total = 0;
    for (const auto& layer : net.layers)
        std::visit(
            [&](const auto& l) {
                total += static_cast<std::size_t>(l.w.size()) + static_cast<std::size_t>(l.b.size());
            },
            layer);
    return total;
}

/// He/Kaiming normal fill: N(0, sqrt(2 / fan_in)), row-major draw order.
inline void kaiming_fill(Matrix& w, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(w.rows())));
    for (Index i = 0; i < w.rows(); ++i)
        for (Index j = 0; j < w.cols(); ++j) w(i, j) = dist(rng);
}

/// Glorot/Xavier uniform fill: U(-a, a), a = sqrt(6 / (fan_in + fan_out)),
/// row-major draw order.
inline void xavier_fill(Matrix& w, std::mt19937_64& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    std::uniform_real_distribution<double> dist(-a, a);
    for (Index i = 0; i < w.rows(); ++i)
        for (Index j = 0; j < w.cols(); ++j) w(i, j) = dist(rng);
}

enum class Init { kaiming, xavier };

inline DenseLayer make_dense(Index fan_in, Index fan_out, Activation act, Init init,
                             std::mt19937_64& rng) {
    DenseLayer layer;
    layer.w.resize(fan_in, fan_out);
    layer.b = Vector::Zero(fan_out);
    layer.act = act;
    if (init == Init::kaiming)
        kaiming_fill(layer.w, rng);
    else
        xavier_fill(layer.w, rng);
    return layer;
}

inline Conv1dLayer make_conv1d(Index in_channels, Index out_channels, Index kernel_width,
                               Index stride, Activation act, Init init, std::mt19937_64& rng) {
    if (in_channels < 1 || out_channels < 1 || kernel_width < 1 || stride < 1)
        throw std::invalid_argument("make_conv1d: shape parameters must be positive");
    Conv1dLayer layer;
    layer.w.resize(in_channels * kernel_width, out_channels);
    layer.b = Vector::Zero(out_channels);
    layer.act = act;
    layer.in_channels = in_channels;
    layer.kernel_width = kernel_width;
    layer.stride = stride;
    if (init == Init::kaiming)
        kaiming_fill(layer.w, rng);
    else
        xavier_fill(layer.w, rng);
    return layer;
}

namespace detail {

// im2col patch matrix: row (sample * L_out + t), column (channel * kw + k).
inline Matrix im2col(const Conv1dLayer& c, const Matrix& x) {
    const Index b = x.rows();
    const Index length = x.cols() / c.in_channels;
    const Index l_out = c.output_length(length);
    Matrix cols(b * l_out, c.in_channels * c.kernel_width);
    for (Index i = 0; i < b; ++i)
        for (Index t = 0; t < l_out; ++t)
            for (Index ci = 0; ci < c.in_channels; ++ci)
                for (Index k = 0; k < c.kernel_width; ++k)
                    cols(i * l_out + t, ci * c.kernel_width + k) =
                        x(i, ci * length + t * c.stride + k);
    return cols;
}

}  // namespace detail

/// Post-activations of every layer for one batch, reused by the backward pass.
struct ForwardRecord {
    std::vector<Matrix> post;

    const Matrix& output() const { return post.back(); }
};

inline Matrix layer_forward(const Layer& layer, const Matrix& x) {
    if (const auto* d = std::get_if<DenseLayer>(&layer)) {
        if (x.cols() != d->fan_in())
            throw std::invalid_argument("dense layer expects " + std::to_string(d->fan_in()) +
                                        " inputs, got " + std::to_string(x.cols()));
        Matrix pre = x * d->w;
        pre.rowwise() += d->b.transpose();
        return apply_activation(pre, d->act);
    }
    const auto& c = std::get<Conv1dLayer>(layer);
    if (x.cols() % c.in_channels != 0)
        throw std::invalid_argument("conv1d: input dim not divisible by channel count");
    const Index b = x.rows();
    const Index length = x.cols() / c.in_channels;
    const Index l_out = c.output_length(length);
    Matrix pre2 = detail::im2col(c, x) * c.w;  // (b * l_out) x oc
    pre2.rowwise() += c.b.transpose();
    Matrix pre(b, c.out_channels() * l_out);  // channel-major flatten
    for (Index i = 0; i < b; ++i)
        for (Index ch = 0; ch < c.out_channels(); ++ch)
            for (Index t = 0; t < l_out; ++t) pre(i, ch * l_out + t) = pre2(i * l_out + t, ch);
    return apply_activation(pre, c.act);
}

inline ForwardRecord forward(const Network& net, const Matrix& x) {
    ForwardRecord record;
    record.post.reserve(net.size());
    const Matrix* current = &x;
    for (const auto& layer : net.layers) {
        record.post.push_back(layer_forward(layer, *current));
        current = &record.post.back();
    }
    return record;
}

inline Matrix predict(const Network& net, const Matrix& x) { return forward(net, x).output(); }

struct LayerGrads {
    Matrix weights;
    Vector bias;
};

struct NetGrads {
    std::vector<LayerGrads> layers;
};

/// Reverse pass. `output_delta` is the loss gradient with respect to the last
/// layer's *pre-activation* (the output nonlinearity is fused with the primary
/// loss). `tap_grads` maps layer index -> loss gradient with respect to that
/// layer's *post-activation*; tap contributions are added to the flowing
/// post-activation gradient before the activation derivative is applied.
inline NetGrads backward(const Network& net, const Matrix& input, const ForwardRecord& record,
                         const Matrix& output_delta,
                         const std::unordered_map<int, Matrix>& tap_grads = {}) {
    const auto layer_count = static_cast<int>(net.size());
    if (layer_count == 0) throw std::invalid_argument("backward: empty network");
    if (record.post.size() != net.size())
        throw std::invalid_argument("backward: record does not match network");
    if (tap_grads.count(layer_count - 1))
        throw std::invalid_argument("backward: output layer cannot carry a tap gradient");

    NetGrads grads;
    grads.layers.resize(net.size());

    Matrix delta_post;  // dL/d(post-activation of current layer), unused for the last layer
    for (int l = layer_count - 1; l >= 0; --l) {
        const Matrix& layer_in = (l == 0) ? input : record.post[static_cast<std::size_t>(l) - 1];
        const Matrix& post = record.post[static_cast<std::size_t>(l)];

        Matrix delta_pre;
        if (l == layer_count - 1) {
            delta_pre = output_delta;
        } else {
            auto tap = tap_grads.find(l);
            if (tap != tap_grads.end()) delta_post += tap->second;
            delta_pre =
                delta_post.cwiseProduct(activation_derivative(post, layer_activation(net.layers[static_cast<std::size_t>(l)])));
        }

        if (const auto* d = std::get_if<DenseLayer>(&net.layers[static_cast<std::size_t>(l)])) {
            grads.layers[static_cast<std::size_t>(l)].weights = layer_in.transpose() * delta_pre;
            grads.layers[static_cast<std::size_t>(l)].bias = delta_pre.colwise().sum();
            if (l > 0) delta_post = delta_pre * d->w.transpose();
        } else {
            const auto& c = std::get<Conv1dLayer>(net.layers[static_cast<std::size_t>(l)]);
            const Index b = layer_in.rows();
            const Index length = layer_in.cols() / c.in_channels;
            const Index l_out = c.output_length(length);
            // Un-flatten channel-major dL/dpre into im2col row order.
            Matrix delta2(b * l_out, c.out_channels());
            for (Index i = 0; i < b; ++i)
                for (Index ch = 0; ch < c.out_channels(); ++ch)
                    for (Index t = 0; t < l_out; ++t)
                        delta2(i * l_out + t, ch) = delta_pre(i, ch * l_out + t);
            const Matrix cols = detail::im2col(c, layer_in);
            grads.layers[static_cast<std::size_t>(l)].weights = cols.transpose() * delta2;
            grads.layers[static_cast<std::size_t>(l)].bias = delta2.colwise().sum();
            if (l > 0) {
                const Matrix dcols = delta2 * c.w.transpose();
                Matrix dx = Matrix::Zero(b, layer_in.cols());
                for (Index i = 0; i < b; ++i)
                    for (Index t = 0; t < l_out; ++t)
                        for (Index ci = 0; ci < c.in_channels; ++ci)
                            for (Index k = 0; k < c.kernel_width; ++k)
                                dx(i, ci * length + t * c.stride + k) +=
                                    dcols(i * l_out + t, ci * c.kernel_width + k);
                delta_post = std::move(dx);
            }
        }
    }
    return grads;
}

namespace detail {

inline void write_u32_nn(std::ostream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline void write_f64(std::ostream& os, double v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline std::uint32_t read_u32_nn(std::istream& is) {
    std::uint32_t v = 0;
    if (!is.read(reinterpret_cast<char*>(&v), sizeof v))
        throw std::runtime_error("checkpoint: unexpected end of file");
    return v;
}

inline double read_f64(std::istream& is) {
    double v = 0;
    if (!is.read(reinterpret_cast<char*>(&v), sizeof v))
        throw std::runtime_error("checkpoint: unexpected end of file");
    return v;
}

inline std::uint8_t read_u8(std::istream& is) {
    char c = 0;
    if (!is.read(&c, 1)) throw std::runtime_error("checkpoint: unexpected end of file");
    return static_cast<std::uint8_t>(c);
}

}  // namespace detail

/// Binary checkpoint. Layout: magic "NNW1"; u32 layer count; per layer a u8
/// type tag (0 dense, 1 conv1d), the shape as u32s (dense: fan_in, fan_out;
/// conv: out_channels, in_channels, kernel_width, stride), a u8 activation
/// tag, then f64 parameters (dense: weights row-major, then bias; conv:
/// kernels in (out_channel, in_channel, offset) order, then bias). All values
/// little-endian. Companion-loss tap indices are training configuration and
/// are not persisted.
inline void save_network(const Network& net, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for write: " + path);
    os.write("NNW1", 4);
    detail::write_u32_nn(os, static_cast<std::uint32_t>(net.size()));
    for (const auto& layer : net.layers) {
        if (const auto* d = std::get_if<DenseLayer>(&layer)) {
            os.put(0);
            detail::write_u32_nn(os, static_cast<std::uint32_t>(d->fan_in()));
            detail::write_u32_nn(os, static_cast<std::uint32_t>(d->fan_out()));
            os.put(static_cast<char>(d->act));
            for (Index i = 0; i < d->w.rows(); ++i)
                for (Index j = 0; j < d->w.cols(); ++j) detail::write_f64(os, d->w(i, j));
            for (Index j = 0; j < d->b.size(); ++j) detail::write_f64(os, d->b[j]);
        } else {
            const auto& c = std::get<Conv1dLayer>(layer);
            os.put(1);
            detail::write_u32_nn(os, static_cast<std::uint32_t>(c.out_channels()));
            detail::write_u32_nn(os, static_cast<std::uint32_t>(c.in_channels));
            detail::write_u32_nn(os, static_cast<std::uint32_t>(c.kernel_width));
            detail::write_u32_nn(os, static_cast<std::uint32_t>(c.stride));
            os.put(static_cast<char>(c.act));
            for (Index oc = 0; oc < c.out_channels(); ++oc)
                for (Index ci = 0; ci < c.in_channels; ++ci)
                    for (Index k = 0; k < c.kernel_width; ++k)
                        detail::write_f64(os, c.w(ci * c.kernel_width + k, oc));
            for (Index j = 0; j < c.b.size(); ++j) detail::write_f64(os, c.b[j]);
        }
    }
    if (!os) throw std::runtime_error("write failed: " + path);
}

inline Network load_network(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open: " + path);
    char magic[4] = {};
    if (!is.read(magic, 4) || std::string(magic, 4) != "NNW1")
        throw std::runtime_error("checkpoint: bad magic in " + path);
    const std::uint32_t count = detail::read_u32_nn(is);
    Network net;
    net.layers.reserve(count);
    for (std::uint32_t l = 0; l < count; ++l) {
        const std::uint8_t type = detail::read_u8(is);
        if (type == 0) {
            DenseLayer d;
            const auto fan_in = static_cast<Index>(detail::read_u32_nn(is));
            const auto fan_out = static_cast<Index>(detail::read_u32_nn(is));
            const std::uint8_t act = detail::read_u8(is);
            if (act > 3) throw std::runtime_error("checkpoint: bad activation tag");
            d.act = static_cast<Activation>(act);
            d.w.resize(fan_in, fan_out);
            for (Index i = 0; i < fan_in; ++i)
                for (Index j = 0; j < fan_out; ++j) d.w(i, j) = detail::read_f64(is);
            d.b.resize(fan_out);
            for (Index j = 0; j < fan_out; ++j) d.b[j] = detail::read_f64(is);
            net.layers.emplace_back(std::move(d));
        } else if (type == 1) {
            Conv1dLayer c;
            const auto oc = static_cast<Index>(detail::read_u32_nn(is));
            c.in_channels = static_cast<Index>(detail::read_u32_nn(is));
            c.kernel_width = static_cast<Index>(detail::read_u32_nn(is));
            c.stride = static_cast<Index>(detail::read_u32_nn(is));
            const std::uint8_t act = detail::read_u8(is);
            if (act > 3) throw std::runtime_error("checkpoint: bad activation tag");
            c.act = static_cast<Activation>(act);
            c.w.resize(c.in_channels * c.kernel_width, oc);
            for (Index o = 0; o < oc; ++o)
                for (Index ci = 0; ci < c.in_channels; ++ci)
                    for (Index k = 0; k < c.kernel_width; ++k)
                        c.w(ci * c.kernel_width + k, o) = detail::read_f64(is);
            c.b.resize(oc);
            for (Index j = 0; j < oc; ++j) c.b[j] = detail::read_f64(is);
            net.layers.emplace_back(std::move(c));
        } else {
            throw std::runtime_error("checkpoint: unknown layer type tag " + std::to_string(type));
        }
    }
    return net;
}

}  // namespace disent
