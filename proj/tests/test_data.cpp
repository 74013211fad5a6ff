#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "scdiff/data.hpp"
#include "scdiff/error.hpp"
#include "scdiff/rng.hpp"

using namespace scdiff;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
    const std::string path = (std::filesystem::temp_directory_path() / name).string();
    std::ofstream out(path);
    out << content;
    return path;
}

}  // namespace

TEST_CASE("load_csv parses a minimal file") {
    const std::string path = write_temp("scdiff_min.csv", "g1,g2\n1,2\n3,4\n");
    const ExpressionMatrix m = load_csv(path);
    CHECK(m.cells() == 2);
    CHECK(m.genes() == 2);
    CHECK(m.values(0, 0) == 1.0);
    CHECK(m.values(0, 1) == 2.0);
    CHECK(m.values(1, 0) == 3.0);
    CHECK(m.values(1, 1) == 4.0);
    CHECK(m.gene_names == std::vector<std::string>{"g1", "g2"});
    std::filesystem::remove(path);
}

TEST_CASE("load_csv skips comment lines") {
    const std::string path = write_temp("scdiff_comment.csv", "# provenance\n# more\ng1\n5\n");
    const ExpressionMatrix m = load_csv(path);
    CHECK(m.cells() == 1);
    CHECK(m.values(0, 0) == 5.0);
    std::filesystem::remove(path);
}

TEST_CASE("load_csv rejects malformed input with line numbers") {
    const std::string empty = write_temp("scdiff_empty.csv", "g1,g2\n");
    CHECK_THROWS_WITH_AS(load_csv(empty), doctest::Contains("no cells"), DataError);
    std::filesystem::remove(empty);

    const std::string nan_field = write_temp("scdiff_na.csv", "g1,g2\n1,NA\n");
    try {
        load_csv(nan_field);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    std::filesystem::remove(nan_field);

    const std::string blank = write_temp("scdiff_blank.csv", "g1,g2\n1,\n");
    CHECK_THROWS_AS(load_csv(blank), DataError);
    std::filesystem::remove(blank);

    const std::string ragged = write_temp("scdiff_ragged.csv", "g1,g2\n1,2\n3\n");
    try {
        load_csv(ragged);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("line 3") != std::string::npos);
        CHECK(msg.find("expected 2") != std::string::npos);
    }
    std::filesystem::remove(ragged);

    CHECK_THROWS_AS(load_csv("/nonexistent/file.csv"), IoError);
}

TEST_CASE("save/load round trip is value-exact at full precision") {
    Rng rng(111);
    ExpressionMatrix m;
    m.values = rng.gaussian_matrix(7, 5);
    for (int j = 0; j < 5; ++j) m.gene_names.push_back("gene" + std::to_string(j));

    const std::string path =
        (std::filesystem::temp_directory_path() / "scdiff_roundtrip.csv").string();
    save_csv(path, m, {"round trip check"});
    const ExpressionMatrix back = load_csv(path);
    CHECK(back.values == m.values);
    CHECK(back.gene_names == m.gene_names);
    std::filesystem::remove(path);
}

TEST_CASE("preprocess: log1p basics") {
    ExpressionMatrix m;
    m.values = Matrix{{0, std::exp(1.0) - 1.0}, {3, 7}};
    m.gene_names = {"a", "b"};
    preprocess(m, {TransformKind::log1p});
    CHECK(m.values(0, 0) == 0.0);
    CHECK(m.values(0, 1) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(m.transform_record.size() == 1);

    ExpressionMatrix bad;
    bad.values = Matrix{{-2.0}};
    bad.gene_names = {"a"};
    CHECK_THROWS_AS(preprocess(bad, {TransformKind::log1p}), DataError);
}

TEST_CASE("preprocess: min-max maps to [-1, 1]") {
    ExpressionMatrix m;
    m.values = Matrix{{0}, {5}, {10}};
    m.gene_names = {"a"};
    preprocess(m, {TransformKind::minmax});
    CHECK(m.values(0, 0) == -1.0);
    CHECK(m.values(1, 0) == 0.0);
    CHECK(m.values(2, 0) == 1.0);
}

TEST_CASE("preprocess: degenerate gene maps to 0 and inverts to the constant") {
    ExpressionMatrix m;
    m.values = Matrix{{4, 1}, {4, 3}};
    m.gene_names = {"const", "var"};
    preprocess(m, {TransformKind::minmax});
    CHECK(m.values(0, 0) == 0.0);
    CHECK(m.values(1, 0) == 0.0);
    const Matrix restored = inverse_transform(m.values, m.transform_record);
    CHECK(restored(0, 0) == 4.0);
    CHECK(restored(1, 0) == 4.0);
}

TEST_CASE("preprocess pipeline inverts within 1e-9 on random positive data") {
    Rng rng(112);
    ExpressionMatrix m;
    m.values = Matrix(20, 6);
    for (size_t i = 0; i < m.values.size(); ++i) m.values.data()[i] = 10.0 * rng.uniform();
    for (int j = 0; j < 6; ++j) m.gene_names.push_back("g" + std::to_string(j));
    const Matrix original = m.values;

    preprocess(m, parse_transform_list("log1p,minmax"));
    CHECK(m.transform_record.size() == 2);
    for (size_t i = 0; i < m.values.size(); ++i) {
        CHECK(m.values.data()[i] >= -1.0);
        CHECK(m.values.data()[i] <= 1.0);
    }
    const Matrix restored = inverse_transform(m.values, m.transform_record);
    for (size_t i = 0; i < original.size(); ++i)
        CHECK(std::abs(restored.data()[i] - original.data()[i]) < 1e-9);
}

TEST_CASE("parse_transform_list validates step names") {
    CHECK(parse_transform_list("").empty());
    CHECK(parse_transform_list("none").empty());
    CHECK(parse_transform_list("log1p,minmax").size() == 2);
    CHECK_THROWS_AS(parse_transform_list("zscore"), ConfigError);
}

TEST_CASE("generate_synthetic: point mass when variance is zero") {
    SyntheticSpec spec;
    spec.components = 1;
    spec.genes = 3;
    spec.cells = 10;
    spec.means = {{1.0, 2.0, 3.0}};
    spec.sigmas = {{0.0, 0.0, 0.0}};
    const ExpressionMatrix m = generate_synthetic(spec);
    for (int i = 0; i < 10; ++i) {
        CHECK(m.values(i, 0) == 1.0);
        CHECK(m.values(i, 1) == 2.0);
        CHECK(m.values(i, 2) == 3.0);
        CHECK(m.labels[i] == 0);
    }
}

TEST_CASE("generate_synthetic: well-separated component means are recovered") {
    SyntheticSpec spec;
    spec.components = 2;
    spec.genes = 2;
    spec.cells = 4000;
    spec.seed = 113;
    spec.means = {{-5.0, -5.0}, {5.0, 5.0}};
    spec.sigmas = {{0.5, 0.5}, {0.5, 0.5}};
    const ExpressionMatrix m = generate_synthetic(spec);

    double mean0[2] = {0, 0}, mean1[2] = {0, 0};
    int n0 = 0, n1 = 0;
    for (int i = 0; i < m.cells(); ++i) {
        if (m.labels[i] == 0) {
            ++n0;
            for (int j = 0; j < 2; ++j) mean0[j] += m.values(i, j);
        } else {
            ++n1;
            for (int j = 0; j < 2; ++j) mean1[j] += m.values(i, j);
        }
    }
    REQUIRE(n0 > 100);
    REQUIRE(n1 > 100);
    for (int j = 0; j < 2; ++j) {
        CHECK(std::abs(mean0[j] / n0 + 5.0) < 4.0 * 0.5 / std::sqrt(static_cast<double>(n0)));
        CHECK(std::abs(mean1[j] / n1 - 5.0) < 4.0 * 0.5 / std::sqrt(static_cast<double>(n1)));
    }
}

TEST_CASE("generate_synthetic: same seed gives the identical dataset") {
    SyntheticSpec spec;
    spec.seed = 114;
    spec.cells = 50;
    const ExpressionMatrix a = generate_synthetic(spec);
    const ExpressionMatrix b = generate_synthetic(spec);
    CHECK(a.values == b.values);
    CHECK(a.labels == b.labels);
}

TEST_CASE("generate_synthetic rejects invalid weights") {
    SyntheticSpec spec;
    spec.weights = {0.9, 0.3};
    CHECK_THROWS_AS(generate_synthetic(spec), ConfigError);
    spec.weights = {-0.5, 1.5};
    CHECK_THROWS_AS(generate_synthetic(spec), ConfigError);
    spec.weights = {0.5};
    CHECK_THROWS_AS(generate_synthetic(spec), ConfigError);
}

TEST_CASE("generate_synthetic: negative-binomial counts with plausible moments") {
    SyntheticSpec spec;
    spec.kind = MixtureKind::negbinomial;
    spec.components = 1;
    spec.genes = 1;
    spec.cells = 8000;
    spec.seed = 115;
    spec.means = {{20.0}};
    spec.nb_dispersion = 2.0;
    const ExpressionMatrix m = generate_synthetic(spec);

    double mean = 0.0, sq = 0.0;
    for (int i = 0; i < m.cells(); ++i) {
        const double x = m.values(i, 0);
        CHECK(x >= 0.0);
        CHECK(x == std::floor(x));  // integer counts
        mean += x;
        sq += x * x;
    }
    mean /= m.cells();
    const double var = sq / m.cells() - mean * mean;
    CHECK(mean == doctest::Approx(20.0).epsilon(0.05));
    // NB variance mu + mu^2 / r = 20 + 200 = 220, over-dispersed vs Poisson
    CHECK(var == doctest::Approx(220.0).epsilon(0.25));
    CHECK(var > 2.0 * mean);
}

TEST_CASE("mixture kind names round trip") {
    CHECK(mixture_kind_from_name("gaussian_mixture") == MixtureKind::gaussian);
    CHECK(mixture_kind_from_name("negbinomial_mixture") == MixtureKind::negbinomial);
    CHECK_THROWS_AS(mixture_kind_from_name("uniform"), ConfigError);
    CHECK(std::string(mixture_kind_name(MixtureKind::gaussian)) == "gaussian_mixture");
}
