#pragma once

#include <string>
#include <vector>

namespace magnum {

enum class ColumnKind { Numeric, Categorical };

struct ColumnSpec {
    std::string name;
    ColumnKind kind = ColumnKind::Numeric;
    std::vector<std::string> vocabulary;  // categorical columns only
};

struct NumericStats {
    double mean = 0.0;
    double stdev = 1.0;
};

// Column layout of the tabular modality. Normalization statistics are fitted
// on the training split and serialized alongside the columns; until fitted,
// `normalization` is empty.
struct TabularSchema {
    std::vector<ColumnSpec> columns;
    std::vector<NumericStats> normalization;

    bool fitted() const {
        return !columns.empty() && normalization.size() == columns.size();
    }
};

std::string schema_to_json(const TabularSchema& schema);
TabularSchema schema_from_json(const std::string& text);

}  // namespace magnum
