#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include <disent/losses.hpp>
#include <disent/nn.hpp>

#include "oracles.hpp"

using namespace disent;

TEST_CASE("one_hot encodes and validates") {
    const Matrix y = one_hot({2, 0, 1}, 3);
    Matrix expected(3, 3);
    expected << 0, 0, 1, 1, 0, 0, 0, 1, 0;
    CHECK(y == expected);
    CHECK_THROWS_AS(one_hot({3}, 3), std::invalid_argument);
    CHECK_THROWS_AS(one_hot({-1}, 3), std::invalid_argument);
}

TEST_CASE("cross entropy on known distributions") {
    Matrix p(2, 2);
    p << 0.5, 0.5, 0.25, 0.75;
    const double expected = (-std::log(0.5) - std::log(0.75)) / 2.0;
    CHECK_THAT(cross_entropy(p, {0, 1}), Catch::Matchers::WithinAbs(expected, 1e-15));
    CHECK_THROWS_AS(cross_entropy(p, {0}), std::invalid_argument);
    CHECK_THROWS_AS(cross_entropy(p, {0, 2}), std::invalid_argument);
}

TEST_CASE("fused softmax cross-entropy delta matches finite differences") {
    std::mt19937_64 rng(17);
    const Matrix z = oracle::random_matrix(5, 4, rng);
    const std::vector<int> y{0, 3, 1, 2, 0};
    auto loss_of = [&](const Matrix& logits) {
        return cross_entropy(apply_activation(logits, Activation::softmax), y);
    };
    const Matrix delta = cross_entropy_softmax_delta(apply_activation(z, Activation::softmax), y);
    const double h = 1e-6;
    for (Index i = 0; i < z.rows(); ++i)
        for (Index j = 0; j < z.cols(); ++j) {
            Matrix zp = z, zm = z;
            zp(i, j) += h;
            zm(i, j) -= h;
            const double fd = (loss_of(zp) - loss_of(zm)) / (2.0 * h);
            CHECK_THAT(delta(i, j), Catch::Matchers::WithinAbs(fd, 1e-7));
        }
}

TEST_CASE("binary cross entropy on known values") {
    const Matrix r = Matrix::Constant(3, 4, 0.5);
    const Matrix x = Matrix::Constant(3, 4, 0.2);
    // every element contributes ln 2; sum over 4 columns, mean over rows
    CHECK_THAT(binary_cross_entropy(r, x),
               Catch::Matchers::WithinAbs(4.0 * std::log(2.0), 1e-12));
    CHECK_THROWS_AS(binary_cross_entropy(r, Matrix::Constant(3, 4, 1.5)), std::invalid_argument);
    CHECK_THROWS_AS(binary_cross_entropy(r, Matrix::Constant(3, 4, -0.1)), std::invalid_argument);
    CHECK_THROWS_AS(binary_cross_entropy(r, Matrix::Zero(2, 4)), std::invalid_argument);
}

TEST_CASE("fused logistic BCE delta matches finite differences") {
    std::mt19937_64 rng(31);
    const Matrix z = oracle::random_matrix(4, 5, rng);
    Matrix target(4, 5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (Index i = 0; i < 4; ++i)
        for (Index j = 0; j < 5; ++j) target(i, j) = u(rng);
    auto loss_of = [&](const Matrix& pre) {
        return binary_cross_entropy(apply_activation(pre, Activation::logistic), target);
    };
    const Matrix delta = bce_logistic_delta(apply_activation(z, Activation::logistic), target);
    const double h = 1e-6;
    for (Index i = 0; i < z.rows(); ++i)
        for (Index j = 0; j < z.cols(); ++j) {
            Matrix zp = z, zm = z;
            zp(i, j) += h;
            zm(i, j) -= h;
            const double fd = (loss_of(zp) - loss_of(zm)) / (2.0 * h);
            CHECK_THAT(delta(i, j), Catch::Matchers::WithinAbs(fd, 1e-7));
        }
}
