#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "magnum/schema.hpp"

namespace magnum {

struct UnstructuredSpec {
    std::string name;
    size_t count = 0;  // embeddings per sample
    size_t dim = 0;    // embedding width
};

struct EmbMatrix {
    size_t rows = 0;
    size_t cols = 0;
    std::vector<double> values;  // row-major
};

struct Sample {
    std::string id;
    size_t label = 0;
    std::vector<std::string> tabular;             // raw cell text, schema order
    std::map<std::string, EmbMatrix> embeddings;  // modality name -> matrix
};

struct Dataset {
    std::vector<std::string> class_names;
    TabularSchema schema;
    std::vector<UnstructuredSpec> unstructured;
    std::vector<Sample> samples;

    bool has_tabular() const { return !schema.columns.empty(); }
    size_t num_classes() const { return class_names.size(); }

    // All modality names in the canonical (lexicographic) order.
    std::vector<std::string> modality_names() const;
};

struct SplitIndices {
    std::vector<size_t> train;
    std::vector<size_t> val;
    std::vector<size_t> test;
};

// Stratified 70/15/15 partition. Within each class the indices are shuffled
// with a seed-derived generator, whole-sample counts are floored, and the
// leftover samples go to the splits with the largest fractional remainders
// (ties broken by a train->val->test cursor that persists across classes).
SplitIndices split(const Dataset& dataset, uint64_t seed);

void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace magnum
