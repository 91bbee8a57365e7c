#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

#include <disent/losses.hpp>
#include <disent/nn.hpp>
#include <disent/snnl.hpp>

#include "oracles.hpp"

using namespace disent;

TEST_CASE("activations") {
    Matrix z(1, 4);
    z << -1.0, 0.0, 2.0, -3.0;
    const Matrix relu = apply_activation(z, Activation::relu);
    CHECK(relu(0, 0) == 0.0);
    CHECK(relu(0, 2) == 2.0);
    CHECK(apply_activation(z, Activation::identity) == z);
    const Matrix sig = apply_activation(z, Activation::logistic);
    CHECK_THAT(sig(0, 1), Catch::Matchers::WithinAbs(0.5, 1e-15));
    CHECK_THAT(sig(0, 2), Catch::Matchers::WithinAbs(1.0 / (1.0 + std::exp(-2.0)), 1e-15));

    const Matrix uniform = apply_activation(Matrix::Zero(2, 4), Activation::softmax);
    for (Index i = 0; i < 2; ++i)
        for (Index j = 0; j < 4; ++j) CHECK(uniform(i, j) == 0.25);

    // numerically stable on huge logits
    Matrix big(1, 3);
    big << 1000.0, 0.0, -1000.0;
    const Matrix soft = apply_activation(big, Activation::softmax);
    CHECK(soft.allFinite());
    CHECK_THAT(soft.row(0).sum(), Catch::Matchers::WithinAbs(1.0, 1e-12));
    CHECK(soft(0, 0) > 0.999);

    CHECK_THROWS_AS(activation_derivative(uniform, Activation::softmax), std::invalid_argument);
}

TEST_CASE("initializers have the expected scale") {
    std::mt19937_64 rng(123);
    Matrix w(500, 500);
    kaiming_fill(w, rng);
    const double std_dev = std::sqrt(w.array().square().mean());
    CHECK_THAT(std_dev, Catch::Matchers::WithinAbs(std::sqrt(2.0 / 500.0), 0.005));

    Matrix v(400, 200);
    xavier_fill(v, rng);
    const double bound = std::sqrt(6.0 / 600.0);
    CHECK(v.maxCoeff() <= bound);
    CHECK(v.minCoeff() >= -bound);
    CHECK(v.maxCoeff() > 0.9 * bound);  // actually fills the range
}

TEST_CASE("conv1d forward matches a hand computation") {
    std::mt19937_64 rng(1);
    Conv1dLayer c = make_conv1d(1, 2, 2, 1, Activation::identity, Init::kaiming, rng);
    c.w << 1.0, -1.0,  // offset 0: ch0 weight 1, ch1 weight -1
        2.0, 0.5;      // offset 1
    c.b << 0.25, -0.25;
    Matrix x(1, 4);
    x << 1.0, 2.0, 3.0, 4.0;
    const Matrix out = layer_forward(Layer{c}, x);
    REQUIRE(out.cols() == 6);  // 2 channels x 3 positions, channel-major
    // channel 0: x[t] * 1 + x[t+1] * 2 + 0.25
    CHECK_THAT(out(0, 0), Catch::Matchers::WithinAbs(1 + 4 + 0.25, 1e-15));
    CHECK_THAT(out(0, 1), Catch::Matchers::WithinAbs(2 + 6 + 0.25, 1e-15));
    CHECK_THAT(out(0, 2), Catch::Matchers::WithinAbs(3 + 8 + 0.25, 1e-15));
    // channel 1: -x[t] + 0.5 x[t+1] - 0.25
    CHECK_THAT(out(0, 3), Catch::Matchers::WithinAbs(-1 + 1 - 0.25, 1e-15));
    CHECK_THAT(out(0, 4), Catch::Matchers::WithinAbs(-2 + 1.5 - 0.25, 1e-15));
    CHECK_THAT(out(0, 5), Catch::Matchers::WithinAbs(-3 + 2 - 0.25, 1e-15));
}

TEST_CASE("conv1d stride and channel handling") {
    std::mt19937_64 rng(2);
    Conv1dLayer c = make_conv1d(2, 1, 3, 2, Activation::identity, Init::kaiming, rng);
    // rows indexed (channel * kw + offset)
    c.w << 1, 1, 1, 10, 10, 10;
    c.b << 0.0;
    Matrix x(1, 14);  // 2 channels of length 7, channel-major
    for (Index j = 0; j < 7; ++j) {
        x(0, j) = static_cast<double>(j);        // channel 0: 0..6
        x(0, 7 + j) = static_cast<double>(j) * 2;  // channel 1: 0..12
    }
    const Matrix out = layer_forward(Layer{c}, x);
    REQUIRE(out.cols() == 3);  // (7 - 3) / 2 + 1
    // position t: sum(ch0[t..t+2]) + 10 * sum(ch1[t..t+2]) with t in {0, 2, 4}
    CHECK_THAT(out(0, 0), Catch::Matchers::WithinAbs((0 + 1 + 2) + 10 * (0 + 2 + 4), 1e-12));
    CHECK_THAT(out(0, 1), Catch::Matchers::WithinAbs((2 + 3 + 4) + 10 * (4 + 6 + 8), 1e-12));
    CHECK_THAT(out(0, 2), Catch::Matchers::WithinAbs((4 + 5 + 6) + 10 * (8 + 10 + 12), 1e-12));

    Matrix short_input = Matrix::Ones(1, 4);  // 2 channels of length 2 < kw
    CHECK_THROWS_AS(layer_forward(Layer{c}, short_input), std::invalid_argument);
}

namespace {

double composite_loss(const Network& net, const Matrix& x, const std::vector<int>& y,
                      double alpha, double t) {
    const ForwardRecord fwd = forward(net, x);
    double loss = cross_entropy(fwd.output(), y);
    for (int tap : net.snnl_taps)
        loss += alpha * snnl_forward(fwd.post[static_cast<std::size_t>(tap)], y, t).loss;
    return loss;
}

double max_backward_fd_error(Network& net, const Matrix& x, const std::vector<int>& y,
                             double alpha, double t) {
    const ForwardRecord fwd = forward(net, x);
    const Matrix delta = cross_entropy_softmax_delta(fwd.output(), y);
    std::unordered_map<int, Matrix> taps;
    for (int tap : net.snnl_taps)
        taps.emplace(tap, alpha * snnl_gradient(fwd.post[static_cast<std::size_t>(tap)], y, t));
    const NetGrads grads = backward(net, x, fwd, delta, taps);

    const double h = 1e-6;
    double worst = 0.0;
    auto probe = [&](double& param, double analytic) {
        const double orig = param;
        param = orig + h;
        const double lp = composite_loss(net, x, y, alpha, t);
        param = orig - h;
        const double lm = composite_loss(net, x, y, alpha, t);
        param = orig;
        const double fd = (lp - lm) / (2.0 * h);
        const double denom = std::max({std::abs(fd), std::abs(analytic), 1e-8});
        worst = std::max(worst, std::abs(fd - analytic) / denom);
    };
    for (std::size_t l = 0; l < net.size(); ++l)
        std::visit(
            [&](auto& layer) {
                for (Index i = 0; i < layer.w.rows(); ++i)
                    for (Index j = 0; j < layer.w.cols(); ++j)
                        probe(layer.w(i, j), grads.layers[l].weights(i, j));
                for (Index j = 0; j < layer.b.size(); ++j)
                    probe(layer.b[j], grads.layers[l].bias[j]);
            },
            net.layers[l]);
    return worst;
}

}  // namespace

TEST_CASE("composite backward matches finite differences (dense)") {
    std::mt19937_64 rng(99);
    Network net;
    net.layers.push_back(make_dense(10, 8, Activation::relu, Init::kaiming, rng));
    net.layers.push_back(make_dense(8, 8, Activation::relu, Init::kaiming, rng));
    net.layers.push_back(make_dense(8, 3, Activation::softmax, Init::xavier, rng));
    net.snnl_taps = {0, 1};
    const Matrix x = oracle::random_matrix(8, 10, rng);
    const std::vector<int> y{0, 1, 2, 0, 1, 2, 0, 1};
    CHECK(max_backward_fd_error(net, x, y, 0.7, 0.68) < 1e-4);
}

TEST_CASE("composite backward matches finite differences (conv front end)") {
    std::mt19937_64 rng(7);
    Network net;
    net.layers.push_back(make_conv1d(1, 3, 3, 1, Activation::relu, Init::kaiming, rng));
    net.layers.push_back(make_dense(24, 6, Activation::relu, Init::kaiming, rng));
    net.layers.push_back(make_dense(6, 3, Activation::softmax, Init::xavier, rng));
    net.snnl_taps = {0, 1};
    const Matrix x = oracle::random_matrix(6, 10, rng);
    const std::vector<int> y{0, 1, 2, 0, 1, 2};
    CHECK(max_backward_fd_error(net, x, y, 0.4, 1.0) < 1e-4);
}

TEST_CASE("backward rejects a tap on the output layer") {
    std::mt19937_64 rng(4);
    Network net;
    net.layers.push_back(make_dense(5, 4, Activation::relu, Init::kaiming, rng));
    net.layers.push_back(make_dense(4, 2, Activation::softmax, Init::xavier, rng));
    const Matrix x = oracle::random_matrix(3, 5, rng);
    const ForwardRecord fwd = forward(net, x);
    const Matrix delta = Matrix::Zero(3, 2);
    std::unordered_map<int, Matrix> taps;
    taps.emplace(1, Matrix::Zero(3, 2));
    CHECK_THROWS_AS(backward(net, x, fwd, delta, taps), std::invalid_argument);
}

TEST_CASE("checkpoint round trip is exact") {
    std::mt19937_64 rng(55);
    Network net;
    net.layers.push_back(make_conv1d(1, 4, 5, 1, Activation::relu, Init::kaiming, rng));
    net.layers.push_back(make_dense(4 * 16, 7, Activation::relu, Init::kaiming, rng));
    net.layers.push_back(make_dense(7, 3, Activation::softmax, Init::xavier, rng));

    const auto path = (std::filesystem::temp_directory_path() / "disent_test_model.nnw").string();
    save_network(net, path);
    const Network loaded = load_network(path);
    REQUIRE(loaded.size() == net.size());
    for (std::size_t l = 0; l < net.size(); ++l) {
        if (const auto* d = std::get_if<DenseLayer>(&net.layers[l])) {
            const auto& ld = std::get<DenseLayer>(loaded.layers[l]);
            CHECK(ld.w == d->w);
            CHECK(ld.b == d->b);
            CHECK(ld.act == d->act);
        } else {
            const auto& c = std::get<Conv1dLayer>(net.layers[l]);
            const auto& lc = std::get<Conv1dLayer>(loaded.layers[l]);
            CHECK(lc.w == c.w);
            CHECK(lc.b == c.b);
            CHECK(lc.act == c.act);
            CHECK(lc.in_channels == c.in_channels);
            CHECK(lc.kernel_width == c.kernel_width);
            CHECK(lc.stride == c.stride);
        }
    }
    // forward passes agree exactly
    const Matrix x = oracle::random_matrix(3, 20, rng);
    CHECK(predict(net, x) == predict(loaded, x));
    std::filesystem::remove(path);
}

TEST_CASE("checkpoint loader rejects malformed files") {
    const auto dir = std::filesystem::temp_directory_path();
    const auto bad_magic = (dir / "disent_bad_magic.nnw").string();
    {
        std::ofstream os(bad_magic, std::ios::binary);
        os << "XXXXjunkjunkjunk";
    }
    CHECK_THROWS_WITH(load_network(bad_magic), Catch::Matchers::ContainsSubstring("magic"));
    std::filesystem::remove(bad_magic);

    std::mt19937_64 rng(8);
    Network net;
    net.layers.push_back(make_dense(5, 4, Activation::relu, Init::kaiming, rng));
    const auto truncated = (dir / "disent_truncated.nnw").string();
    save_network(net, truncated);
    const auto full_size = std::filesystem::file_size(truncated);
    std::filesystem::resize_file(truncated, full_size / 2);
    CHECK_THROWS_AS(load_network(truncated), std::runtime_error);
    std::filesystem::remove(truncated);

    CHECK_THROWS_AS(load_network((dir / "disent_does_not_exist.nnw").string()),
                    std::runtime_error);
}

TEST_CASE("forward validates input width") {
    std::mt19937_64 rng(3);
    Network net;
    net.layers.push_back(make_dense(6, 4, Activation::relu, Init::kaiming, rng));
    CHECK_THROWS_AS(predict(net, Matrix::Zero(2, 5)), std::invalid_argument);
}
