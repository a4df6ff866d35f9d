#include <cmath>
#include <filesystem>
#include <vector>

#include "doctest.h"
#include "magnum/dataset.hpp"
#include "magnum/errors.hpp"
#include "magnum/gradcheck.hpp"
#include "magnum/lowlevel.hpp"
#include "magnum/ntf.hpp"
#include "magnum/ops.hpp"
#include "magnum/param.hpp"
#include "magnum/rng.hpp"
#include "support/finite_diff.hpp"

using namespace magnum;
namespace fs = std::filesystem;

namespace {

Tensor random_matrix(size_t rows, size_t cols, Rng& rng) {
    std::vector<double> v(rows * cols);
    for (double& x : v) x = rng.normal();
    return Tensor::from_values({rows, cols}, std::move(v));
}

TabularSchema fitted_numeric_schema(std::vector<std::string> names) {
    TabularSchema s;
    for (auto& n : names) s.columns.push_back({n, ColumnKind::Numeric, {}});
    s.normalization.assign(s.columns.size(), NumericStats{});
    return s;
}

}  // namespace

TEST_CASE("prompted encoder returns prompt states plus the class token") {
    ParamRegistry params;
    Rng rng(31);
    PromptedEncoder enc("u", 32, 2, 2, 4, params, rng);
    Rng data_rng(7);
    const Tensor x = random_matrix(9, 32, data_rng);
    const Tensor out = enc.encode(x);
    CHECK(out.shape() == Shape{5, 32});
    for (double v : out.values()) CHECK(std::isfinite(v));

    CHECK_THROWS_AS(enc.encode(random_matrix(3, 16, data_rng)), DimensionError);
}

TEST_CASE("zero encoder layers reduce to the raw prompts and class token") {
    ParamRegistry params;
    Rng rng(5);
    PromptedEncoder enc("u", 8, 0, 2, 3, params, rng);
    Rng data_rng(6);
    const Tensor out = enc.encode(random_matrix(4, 8, data_rng));
    REQUIRE(out.shape() == Shape{4, 8});
    const Tensor& prompts = params.at("u/prompts").tensor;
    const Tensor& cls = params.at("u/cls").tensor;
    for (size_t i = 0; i < 3; ++i)
        for (size_t j = 0; j < 8; ++j) CHECK(out.at(i, j) == prompts.at(i, j));
    for (size_t j = 0; j < 8; ++j) CHECK(out.at(3, j) == cls.at(j));
}

TEST_CASE("encoder backbone is frozen and only prompts collect gradients") {
    ParamRegistry params;
    Rng rng(11);
    PromptedEncoder enc("u", 8, 2, 2, 2, params, rng);
    Rng data_rng(12);
    backward(sum(enc.encode(random_matrix(3, 8, data_rng))));

    size_t frozen_count = 0;
    for (const Parameter& p : params.all()) {
        if (p.frozen) {
            CHECK_FALSE(p.tensor.has_grad());
            ++frozen_count;
        }
    }
    CHECK(frozen_count == 1 + 2 * 8);  // cls plus eight tensors per layer

    const Tensor& prompts = params.at("u/prompts").tensor;
    REQUIRE(prompts.has_grad());
    double total = 0.0;
    for (double g : prompts.grad()) total += std::abs(g);
    CHECK(total > 0.0);
}

TEST_CASE("encoder construction is deterministic in the seed") {
    ParamRegistry a_params, b_params;
    Rng a_rng(99), b_rng(99);
    PromptedEncoder a("u", 16, 2, 2, 4, a_params, a_rng);
    PromptedEncoder b("u", 16, 2, 2, 4, b_params, b_rng);
    REQUIRE(a_params.all().size() == b_params.all().size());
    for (size_t i = 0; i < a_params.all().size(); ++i) {
        CHECK(a_params.all()[i].tensor.values() == b_params.all()[i].tensor.values());
    }
}

TEST_CASE("encoding one sample does not disturb another") {
    ParamRegistry params;
    Rng rng(21);
    PromptedEncoder enc("u", 8, 1, 2, 2, params, rng);
    Rng data_rng(22);
    const Tensor x1 = random_matrix(3, 8, data_rng);
    const Tensor x2 = random_matrix(5, 8, data_rng);

    const std::vector<double> first = enc.encode(x1).values();
    const std::vector<double> second = enc.encode(x2).values();
    CHECK(enc.encode(x2).values() == second);
    CHECK(enc.encode(x1).values() == first);
}

TEST_CASE("normalization statistics match the hand-computed oracle") {
    Dataset ds;
    ds.class_names = {"c0"};
    ds.schema = fitted_numeric_schema({"a", "b"});
    ds.schema.normalization.clear();
    for (double v : {1.0, 2.0, 3.0, 4.0}) {
        Sample s;
        s.id = "s" + std::to_string(static_cast<int>(v));
        s.tabular = {std::to_string(v), "5.0"};
        ds.samples.push_back(s);
    }
    fit_normalization(ds.schema, ds, {0, 1, 2, 3});
    REQUIRE(ds.schema.fitted());
    CHECK(ds.schema.normalization[0].mean == doctest::Approx(2.5).epsilon(1e-15));
    CHECK(ds.schema.normalization[0].stdev ==
          doctest::Approx(std::sqrt(1.25)).epsilon(1e-15));
    // Constant column: stdev pinned to 1 so the z-score stays 0.
    CHECK(ds.schema.normalization[1].mean == doctest::Approx(5.0));
    CHECK(ds.schema.normalization[1].stdev == 1.0);
    CHECK(encode_column(ds.schema, 1, "5.0") == std::vector<double>{0.0});
}

TEST_CASE("column encoding covers z-scores, one-hots, and missing values") {
    TabularSchema schema;
    schema.columns = {{"num", ColumnKind::Numeric, {}},
                      {"cat", ColumnKind::Categorical, {"a", "b"}}};
    schema.normalization = {{10.0, 2.0}, {}};

    CHECK(encode_column(schema, 0, "14") == std::vector<double>{2.0});
    CHECK(encode_column(schema, 0, "10") == std::vector<double>{0.0});
    CHECK(encode_column(schema, 0, "") == std::vector<double>{0.0});
    CHECK(encode_column(schema, 0, "nan") == std::vector<double>{0.0});
    CHECK(encode_column(schema, 1, "a") == std::vector<double>{1.0, 0.0, 0.0});
    CHECK(encode_column(schema, 1, "b") == std::vector<double>{0.0, 1.0, 0.0});
    CHECK(encode_column(schema, 1, "zzz") == std::vector<double>{0.0, 0.0, 1.0});
    CHECK(encode_column(schema, 1, "") == std::vector<double>{0.0, 0.0, 1.0});
    CHECK_THROWS_AS(encode_column(schema, 2, "x"), SchemaError);
}

TEST_CASE("tabular encoder emits one state per column in schema order") {
    TabularSchema schema = fitted_numeric_schema({"a", "b", "c"});
    ParamRegistry params;
    Rng rng(77);
    TabularEncoder enc("tab", schema, 16, params, rng);
    const Tensor out = enc.encode_row({"0.5", "-1.0", "2.0"});
    CHECK(out.shape() == Shape{3, 16});

    CHECK_THROWS_AS(enc.encode_row({"0.5", "-1.0"}), SchemaError);
}

TEST_CASE("a value at the training mean maps to the zero vector") {
    TabularSchema schema = fitted_numeric_schema({"a"});
    schema.normalization = {{3.0, 2.0}};
    ParamRegistry params;
    Rng rng(13);
    TabularEncoder enc("tab", schema, 8, params, rng);
    const Tensor out = enc.encode_row({"3.0"});
    for (double v : out.values()) CHECK(v == 0.0);
}

TEST_CASE("categorical encoding selects the matching weight row") {
    TabularSchema schema;
    schema.columns = {{"cat", ColumnKind::Categorical, {"a", "b"}}};
    ParamRegistry params;
    Rng rng(17);
    TabularEncoder enc("tab", schema, 4, params, rng);

    // First layer: value "b" selects row 1 of w1. With w2 = identity and the
    // biases at zero, the output is exactly tanh of that row.
    auto& w1 = params.at("tab/cat/w1").tensor;
    auto& w2 = params.at("tab/cat/w2").tensor;
    for (size_t j = 0; j < 4; ++j)
        for (size_t k = 0; k < 4; ++k) w2.values_mut()[j * 4 + k] = j == k ? 1.0 : 0.0;

    const Tensor out = enc.encode_row({"b"});
    REQUIRE(out.shape() == Shape{1, 4});
    for (size_t j = 0; j < 4; ++j) {
        CHECK(out.at(0, j) == doctest::Approx(std::tanh(w1.at(1, j))).epsilon(1e-15));
    }
}

TEST_CASE("tabular encoder requires fitted statistics for numeric columns") {
    TabularSchema schema;
    schema.columns = {{"num", ColumnKind::Numeric, {}}};
    ParamRegistry params;
    Rng rng(1);
    CHECK_THROWS_AS(TabularEncoder("tab", schema, 4, params, rng), ContractError);
}

TEST_CASE("projection preserves state count and changes width") {
    ParamRegistry params;
    Rng rng(41);
    Projection proj("p", 32, 64, params, rng);
    Rng data_rng(42);
    const Tensor out = proj.apply(random_matrix(5, 32, data_rng));
    CHECK(out.shape() == Shape{5, 64});
    CHECK_THROWS_AS(proj.apply(random_matrix(5, 16, data_rng)), DimensionError);
}

TEST_CASE("zeroed projection parameters yield all-zero states") {
    ParamRegistry params;
    Rng rng(43);
    Projection proj("p", 8, 8, params, rng);
    for (Parameter& p : params.all()) {
        for (double& v : p.tensor.values_mut()) v = 0.0;
    }
    Rng data_rng(44);
    const Tensor out = proj.apply(random_matrix(3, 8, data_rng));
    for (double v : out.values()) {
        CHECK(v == 0.0);
    }
}

TEST_CASE("gradient reaches the prompts through encoder and projection") {
    ParamRegistry params;
    Rng rng(53);
    PromptedEncoder enc("u", 8, 1, 2, 2, params, rng);
    Projection proj("u/proj", 8, 8, params, rng);
    Rng data_rng(54);
    const Tensor x = random_matrix(3, 8, data_rng);

    auto loss = [&] { return sum(mul(proj.apply(enc.encode(x)), proj.apply(enc.encode(x)))); };
    backward(loss());
    const Tensor& prompts = params.at("u/prompts").tensor;
    REQUIRE(prompts.has_grad());
    double total = 0.0;
    for (double g : prompts.grad()) total += std::abs(g);
    CHECK(total > 0.0);

    auto trainable = params.trainable();
    params.zero_grad();
    const GradCheckReport report = grad_check(loss, trainable, 1e-5);
    CHECK(report.max_rel_error < 1e-6);
    CHECK(report.entries_checked > 0);
}

TEST_CASE("ingested embedding files reproduce in-memory values exactly") {
    const fs::path dir = fs::temp_directory_path() / "magnum_tests_ingest";
    fs::create_directories(dir);

    Rng rng(61);
    NtfTensor t;
    t.dims = {5, 32};
    for (size_t i = 0; i < 5 * 32; ++i) t.values.push_back(rng.normal());
    write_ntf(t, dir / "e.ntf");

    const Tensor loaded = ingest_embeddings(dir / "e.ntf");
    REQUIRE(loaded.shape() == Shape{5, 32});
    CHECK(loaded.values() == t.values);

    // Equal inputs stay equal downstream.
    ParamRegistry params;
    Rng init(62);
    Projection proj("p", 32, 16, params, init);
    const Tensor in_memory = Tensor::from_values({5, 32}, t.values);
    CHECK(proj.apply(loaded).values() == proj.apply(in_memory).values());

    NtfTensor bad;
    bad.dims = {2, 2, 2};
    bad.values.assign(8, 0.0);
    write_ntf(bad, dir / "bad.ntf");
    CHECK_THROWS_AS(ingest_embeddings(dir / "bad.ntf"), FormatError);
}
