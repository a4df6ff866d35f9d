#include <string>
#include <vector>

#include "doctest.h"
#include "magnum/config.hpp"
#include "magnum/errors.hpp"

using namespace magnum;

TEST_CASE("the canonical text round-trips every field") {
    RunConfig cfg;
    cfg.set("model.common_dim", "16");
    cfg.set("optim.lr", "0.0012999999999999999");
    cfg.set("optim.warmup_fraction", "0.25");
    cfg.set("model.modalities", "emb0,tabular");
    cfg.set("seed", "99");
    const RunConfig back = parse_config(cfg.to_text());
    CHECK(back.to_text() == cfg.to_text());
    CHECK(back.hash() == cfg.hash());
    CHECK(back.common_dim == 16);
    CHECK(back.lr == cfg.lr);
    CHECK(back.seed == 99);
}

TEST_CASE("comments, blank lines and spacing are tolerated") {
    const RunConfig cfg = parse_config(
        "# run settings\n"
        "\n"
        "  midlevel.k = 6  # neighbours\n"
        "optim.epochs=3\n");
    CHECK(cfg.knn_k == 6);
    CHECK(cfg.epochs == 3);
    CHECK(cfg.common_dim == 64);  // untouched default
}

TEST_CASE("unknown keys and malformed values are rejected") {
    CHECK_THROWS_AS(parse_config("nope.key=1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("midlevel.k=abc\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("midlevel.k=-3\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("optim.lr=\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("optim.lr=0\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("optim.warmup_fraction=1.0\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("optim.batch_size=0\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("just a line\n"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_config("nope.key=1\n"),
                         "config error: unknown config key: nope.key", ConfigError);
}

TEST_CASE("any field change moves the hash") {
    const RunConfig base;
    const std::vector<std::pair<std::string, std::string>> tweaks = {
        {"model.common_dim", "65"},   {"model.tabular_dim", "33"},
        {"model.unstructured_dim", "33"}, {"model.prompt_len", "5"},
        {"model.encoder_layers", "3"},    {"model.encoder_heads", "4"},
        {"model.modalities", "tabular"},  {"midlevel.k", "5"},
        {"midlevel.rounds", "2"},         {"midlevel.heads", "2"},
        {"optim.lr", "0.004"},            {"optim.weight_decay", "0.001"},
        {"optim.beta1", "0.8"},           {"optim.beta2", "0.99"},
        {"optim.eps", "1e-7"},            {"optim.batch_size", "16"},
        {"optim.epochs", "31"},           {"optim.warmup_fraction", "0.2"},
        {"seed", "8"},
    };
    for (const auto& [key, value] : tweaks) {
        RunConfig cfg;
        cfg.set(key, value);
        CHECK_MESSAGE(cfg.hash() != base.hash(), "key ", key, " did not affect the hash");
    }
}

TEST_CASE("the modality filter parses lists and the all wildcard") {
    RunConfig cfg;
    CHECK(cfg.modality_filter().empty());
    cfg.modalities = "tabular";
    CHECK(cfg.modality_filter() == std::vector<std::string>{"tabular"});
    cfg.modalities = " emb0 , tabular ";
    CHECK(cfg.modality_filter() == std::vector<std::string>{"emb0", "tabular"});
    cfg.modalities = " , ";
    CHECK_THROWS_AS(cfg.modality_filter(), ConfigError);
}
