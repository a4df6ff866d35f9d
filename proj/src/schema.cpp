#include "magnum/schema.hpp"

#include "json.hpp"
#include "magnum/errors.hpp"

namespace magnum {

using nlohmann::json;

std::string schema_to_json(const TabularSchema& schema) {
    json cols = json::array();
    for (const auto& c : schema.columns) {
        json jc;
        jc["name"] = c.name;
        jc["kind"] = c.kind == ColumnKind::Numeric ? "numeric" : "categorical";
        if (c.kind == ColumnKind::Categorical) {
            jc["vocabulary"] = c.vocabulary;
        }
        cols.push_back(jc);
    }
    json j;
    j["columns"] = cols;
    if (schema.fitted()) {
        json norm = json::array();
        for (const auto& s : schema.normalization) {
            norm.push_back({{"mean", s.mean}, {"stdev", s.stdev}});
        }
        j["normalization"] = norm;
    }
    return j.dump();
}

TabularSchema schema_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw SchemaError(std::string("schema is not valid JSON: ") + e.what());
    }
    TabularSchema schema;
    if (!j.contains("columns") || !j["columns"].is_array()) {
        throw SchemaError("schema is missing a columns array");
    }
    for (const auto& jc : j["columns"]) {
        ColumnSpec c;
        c.name = jc.at("name").get<std::string>();
        const std::string kind = jc.at("kind").get<std::string>();
        if (kind == "numeric") {
            c.kind = ColumnKind::Numeric;
        } else if (kind == "categorical") {
            c.kind = ColumnKind::Categorical;
            c.vocabulary = jc.at("vocabulary").get<std::vector<std::string>>();
        } else {
            throw SchemaError("unknown column kind: " + kind);
        }
        schema.columns.push_back(std::move(c));
    }
    if (j.contains("normalization")) {
        for (const auto& js : j["normalization"]) {
            schema.normalization.push_back(
                {js.at("mean").get<double>(), js.at("stdev").get<double>()});
        }
        if (schema.normalization.size() != schema.columns.size()) {
            throw SchemaError("normalization entry count does not match columns");
        }
    }
    return schema;
}

}  // namespace magnum
