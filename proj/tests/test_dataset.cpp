#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include <disent/dataset.hpp>

#include "oracles.hpp"

using namespace disent;
using Catch::Matchers::ContainsSubstring;

namespace {

namespace fs = std::filesystem;

struct TempFile {
    fs::path path;
    explicit TempFile(const std::string& name) : path(fs::temp_directory_path() / name) {}
    ~TempFile() {
        std::error_code ec;
        fs::remove(path, ec);
    }
    std::string str() const { return path.string(); }
};

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

// random features rounded to f32-representable doubles, as the embedding
// stage produces them
EmbeddedDataset f32_dataset(Index n, Index d, std::uint64_t seed) {
    EmbeddedDataset ds;
    ds.features = oracle::random_matrix(n, d, seed, 3.0);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < d; ++j)
            ds.features(i, j) = static_cast<double>(static_cast<float>(ds.features(i, j)));
    ds.labels.resize(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) ds.labels[static_cast<std::size_t>(i)] = static_cast<int>(i % 3);
    return ds;
}

}  // namespace

TEST_CASE("minmax_scale maps every column onto [0, 1]") {
    EmbeddedDataset ds;
    ds.features = oracle::random_matrix(40, 6, 11, 5.0);
    ds.features.col(4).setConstant(2.5);  // constant column
    ds.labels.assign(40, 0);

    const EmbeddedDataset scaled = minmax_scale(ds);
    REQUIRE(scaled.scaler.has_value());
    CHECK(scaled.labels == ds.labels);
    for (Index j = 0; j < 6; ++j) {
        if (j == 4) {
            CHECK((scaled.features.col(j).array() == 0.5).all());
            continue;
        }
        CHECK(scaled.features.col(j).minCoeff() == 0.0);
        CHECK(scaled.features.col(j).maxCoeff() == 1.0);
        CHECK(scaled.scaler->min[j] == ds.features.col(j).minCoeff());
        CHECK(scaled.scaler->max[j] == ds.features.col(j).maxCoeff());
    }

    ds.features(3, 2) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_WITH(minmax_scale(ds), ContainsSubstring("non-finite"));
}

TEST_CASE("apply_scaler clamps unseen data and inverts cleanly in range") {
    EmbeddedDataset ds;
    ds.features = oracle::random_matrix(30, 4, 17, 2.0);
    ds.labels.assign(30, 1);
    const EmbeddedDataset scaled = minmax_scale(ds);

    Matrix fresh = oracle::random_matrix(10, 4, 18, 10.0);  // wider than the fit range
    const Matrix mapped = apply_scaler(*scaled.scaler, fresh);
    CHECK(mapped.minCoeff() >= 0.0);
    CHECK(mapped.maxCoeff() <= 1.0);

    const Matrix restored = invert_scaler(*scaled.scaler, scaled.features);
    CHECK((restored - ds.features).cwiseAbs().maxCoeff() < 1e-12);

    CHECK_THROWS_AS(apply_scaler(*scaled.scaler, Matrix::Zero(3, 5)), std::invalid_argument);
    CHECK_THROWS_AS(invert_scaler(*scaled.scaler, Matrix::Zero(3, 5)), std::invalid_argument);
}

TEST_CASE("validate_dataset rejects inconsistent bundles") {
    EmbeddedDataset ds = f32_dataset(8, 3, 5);
    CHECK_NOTHROW(validate_dataset(ds));

    EmbeddedDataset short_labels = ds;
    short_labels.labels.pop_back();
    CHECK_THROWS_WITH(validate_dataset(short_labels), ContainsSubstring("label count"));

    EmbeddedDataset inf_feature = ds;
    inf_feature.features(0, 0) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_WITH(validate_dataset(inf_feature), ContainsSubstring("non-finite"));

    EmbeddedDataset bad_scaler = ds;
    bad_scaler.scaler = MinMaxScaler{Vector::Zero(2), Vector::Ones(2)};
    CHECK_THROWS_WITH(validate_dataset(bad_scaler), ContainsSubstring("scaler"));

    EmbeddedDataset out_of_range = ds;  // features well outside [0,1]
    out_of_range.scaler = MinMaxScaler{Vector::Zero(3), Vector::Ones(3)};
    CHECK_THROWS_WITH(validate_dataset(out_of_range), ContainsSubstring("outside [0,1]"));
}

TEST_CASE("embedding cache round trips bitwise") {
    const EmbeddedDataset ds = f32_dataset(25, 7, 29);
    TempFile file("disent_test_cache.emb");
    write_cache(ds, file.str());

    const EmbeddedDataset back = read_cache(file.str());
    CHECK(back.features == ds.features);
    CHECK(back.labels == ds.labels);
    CHECK_FALSE(back.scaler.has_value());

    // writing the same dataset again produces byte-identical files
    TempFile again("disent_test_cache2.emb");
    write_cache(ds, again.str());
    CHECK(slurp(file.path) == slurp(again.path));
}

TEST_CASE("embedding cache preserves the scaler block") {
    EmbeddedDataset ds = f32_dataset(12, 4, 31);
    EmbeddedDataset scaled = minmax_scale(ds);
    // quantize as the embedding pipeline does before writing
    for (Index i = 0; i < scaled.rows(); ++i)
        for (Index j = 0; j < scaled.dim(); ++j)
            scaled.features(i, j) =
                static_cast<double>(static_cast<float>(scaled.features(i, j)));

    TempFile file("disent_test_scaled.emb");
    write_cache(scaled, file.str());
    const EmbeddedDataset back = read_cache(file.str());
    CHECK(back.features == scaled.features);
    REQUIRE(back.scaler.has_value());
    CHECK(back.scaler->dim() == 4);
    for (Index j = 0; j < 4; ++j) {
        CHECK(back.scaler->min[j] ==
              static_cast<double>(static_cast<float>(scaled.scaler->min[j])));
        CHECK(back.scaler->max[j] ==
              static_cast<double>(static_cast<float>(scaled.scaler->max[j])));
    }
}

TEST_CASE("embedding cache rejects malformed files") {
    TempFile file("disent_test_bad.emb");

    {
        std::ofstream os(file.str(), std::ios::binary);
        os << "NOPE garbage";
    }
    CHECK_THROWS_WITH(read_cache(file.str()), ContainsSubstring("bad magic"));

    const EmbeddedDataset ds = f32_dataset(10, 5, 37);
    write_cache(ds, file.str());
    std::filesystem::resize_file(file.path, 4 + 4 + 4 + 1 + 20);  // cut mid-features
    CHECK_THROWS_WITH(read_cache(file.str()), ContainsSubstring("truncated"));

    CHECK_THROWS_WITH(read_cache("/nonexistent/disent.emb"), ContainsSubstring("cannot open"));

    EmbeddedDataset negative = ds;
    negative.labels[0] = -2;
    CHECK_THROWS_WITH(write_cache(negative, file.str()), ContainsSubstring("negative label"));
}
