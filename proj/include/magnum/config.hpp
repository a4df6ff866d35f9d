#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace magnum {

// Flat key=value run configuration. Every tunable has a default here; files
// and flag overrides go through the same setter so unknown keys or bad
// values fail identically everywhere.
struct RunConfig {
    // model geometry
    std::size_t common_dim = 64;        // model.common_dim (d)
    std::size_t tabular_dim = 32;       // model.tabular_dim (d_s)
    std::size_t unstructured_dim = 32;  // model.unstructured_dim (d_u)
    std::size_t prompt_len = 4;         // model.prompt_len (L)
    std::size_t encoder_layers = 2;     // model.encoder_layers (K)
    std::size_t encoder_heads = 2;      // model.encoder_heads
    std::string modalities = "all";     // model.modalities ("all" or comma list)

    // graph compression
    std::size_t knn_k = 4;          // midlevel.k
    std::size_t coarsen_rounds = 1; // midlevel.rounds (R)
    std::size_t attn_heads = 1;     // midlevel.heads (H)

    // optimizer
    double lr = 0.00325;           // optim.lr
    double weight_decay = 1e-5;    // optim.weight_decay
    double beta1 = 0.9;            // optim.beta1
    double beta2 = 0.999;          // optim.beta2
    double adam_eps = 1e-8;        // optim.eps
    std::size_t batch_size = 8;    // optim.batch_size
    std::size_t epochs = 30;       // optim.epochs
    double warmup_fraction = 0.1;  // optim.warmup_fraction

    std::uint64_t seed = 7;  // seed

    // Applies one key=value assignment; throws ConfigError on unknown keys
    // or unparseable values.
    void set(const std::string& key, const std::string& value);

    // Canonical text form: every key in a fixed order, one per line, values
    // rendered so that parsing the text reproduces this config exactly.
    std::string to_text() const;
    std::uint64_t hash() const;

    // Modality allowlist parsed from the `modalities` field; empty means
    // no restriction.
    std::vector<std::string> modality_filter() const;
};

// Parses `# comment` / blank lines / key=value assignments.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

}  // namespace magnum
