#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include <disent/snnl.hpp>

#include "oracles.hpp"

using namespace disent;
using Catch::Matchers::ContainsSubstring;

TEST_CASE("temperature schedule") {
    CHECK(annealing_temperature(0) == 1.0);
    CHECK_THAT(annealing_temperature(29), Catch::Matchers::WithinAbs(std::pow(30.0, -0.55), 1e-15));
    for (int e = 0; e < 49; ++e)
        CHECK(annealing_temperature(e + 1) < annealing_temperature(e));

    TemperatureSchedule s{2.0, 1.0};
    CHECK_THAT(annealing_temperature(0, s), Catch::Matchers::WithinAbs(0.5, 1e-15));

    CHECK_THROWS_AS(annealing_temperature(-1), std::invalid_argument);
    CHECK_THROWS_AS(annealing_temperature(0, {0.5, 0.55}), std::invalid_argument);
    CHECK_THROWS_AS(annealing_temperature(0, {1.0, 0.0}), std::invalid_argument);
}

TEST_CASE("pairwise cosine distance is exactly symmetric with zero diagonal") {
    std::mt19937_64 rng(11);
    const Matrix x = oracle::random_matrix(12, 7, rng);
    const auto cd = pairwise_cosine_distance(x);
    REQUIRE(cd.d.rows() == 12);
    for (Index i = 0; i < 12; ++i) {
        CHECK(cd.d(i, i) == 0.0);
        for (Index j = 0; j < 12; ++j) CHECK(cd.d(i, j) == cd.d(j, i));
    }
    // values agree with the per-pair definition
    for (Index i = 0; i < 12; ++i)
        for (Index j = i + 1; j < 12; ++j)
            CHECK_THAT(cd.d(i, j),
                       Catch::Matchers::WithinAbs(oracle::ref_cosine_distance(x, i, j), 1e-12));
}

TEST_CASE("zero-norm row is rejected by index") {
    Matrix x = Matrix::Ones(4, 3);
    x.row(2).setZero();
    CHECK_THROWS_WITH(pairwise_cosine_distance(x), ContainsSubstring("row 2"));
}

TEST_CASE("forward matches the brute-force transcription") {
    std::mt19937_64 rng(20260825);
    const double temps[] = {1.0, 0.68, 0.15};
    for (int trial = 0; trial < 60; ++trial) {
        const Index b = 2 + static_cast<Index>(rng() % 31);
        const Index m = 1 + static_cast<Index>(rng() % 16);
        const int k = 2 + static_cast<int>(rng() % 4);
        const Matrix x = oracle::random_matrix(b, m, rng);
        std::vector<int> y(static_cast<std::size_t>(b));
        for (auto& v : y) v = static_cast<int>(rng() % static_cast<std::uint64_t>(k));
        const double t = temps[trial % 3];
        const double expected = oracle::ref_snnl(x, y, t);
        CHECK_THAT(snnl_forward(x, y, t).loss, Catch::Matchers::WithinAbs(expected, 1e-12));
    }
}

TEST_CASE("input validation") {
    std::mt19937_64 rng(3);
    Matrix x = Matrix::Ones(1, 3);
    CHECK_THROWS_AS(snnl_forward(x, {0}, 1.0), std::invalid_argument);
    Matrix x2 = oracle::random_matrix(4, 3, rng);
    CHECK_THROWS_AS(snnl_forward(x2, {0, 1}, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(snnl_forward(x2, {0, 1, 0, 1}, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(snnl_forward(x2, {0, 1, 0, 1}, -1.0), std::invalid_argument);
}

TEST_CASE("all-same-class batches score exactly zero") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        const Index b = 2 + static_cast<Index>(rng() % 10);
        const Matrix x = oracle::random_matrix(b, 5, rng);
        const std::vector<int> y(static_cast<std::size_t>(b), 3);
        const auto result = snnl_forward(x, y, 0.68);
        CHECK(std::abs(result.loss) <= 1e-12);
        CHECK_FALSE(result.all_isolated);
    }
}

TEST_CASE("all_isolated flags batches with no same-class neighbors") {
    std::mt19937_64 rng(5);
    const Matrix x = oracle::random_matrix(4, 3, rng);
    CHECK(snnl_forward(x, {0, 1, 2, 3}, 1.0).all_isolated);
    CHECK_FALSE(snnl_forward(x, {0, 1, 2, 0}, 1.0).all_isolated);
}

TEST_CASE("lower temperature shrinks the loss on a well-separated fixture") {
    Matrix x(4, 2);
    x << 1.0, 0.0, 0.9, 0.1, 0.0, 1.0, 0.1, 0.9;
    const std::vector<int> y{0, 0, 1, 1};
    CHECK(snnl_forward(x, y, 0.1).loss < snnl_forward(x, y, 1.0).loss);
}

TEST_CASE("gradient matches central finite differences") {
    std::mt19937_64 rng(42);
    for (const double t : {1.0, 0.68, 0.15}) {
        const Matrix x = oracle::random_matrix(8, 6, rng);
        std::vector<int> y(8);
        for (auto& v : y) v = static_cast<int>(rng() % 3);
        const Matrix g = snnl_gradient(x, y, t);
        const double h = 1e-6;
        for (Index i = 0; i < x.rows(); ++i)
            for (Index j = 0; j < x.cols(); ++j) {
                Matrix xp = x, xm = x;
                xp(i, j) += h;
                xm(i, j) -= h;
                const double fd =
                    (snnl_forward(xp, y, t).loss - snnl_forward(xm, y, t).loss) / (2.0 * h);
                const double denom = std::max({std::abs(fd), std::abs(g(i, j)), 1e-8});
                CHECK(std::abs(fd - g(i, j)) / denom < 1e-4);
            }
    }
}

TEST_CASE("forward_backward agrees with the split entry points") {
    std::mt19937_64 rng(7);
    const Matrix x = oracle::random_matrix(10, 4, rng);
    std::vector<int> y(10);
    for (auto& v : y) v = static_cast<int>(rng() % 3);
    const auto fb = snnl_forward_backward(x, y, 0.68);
    CHECK(fb.value.loss == snnl_forward(x, y, 0.68).loss);
    CHECK(fb.grad == snnl_gradient(x, y, 0.68));
}
