#include "magnum/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "magnum/csv.hpp"
#include "magnum/errors.hpp"
#include "magnum/ntf.hpp"
#include "magnum/rng.hpp"

namespace magnum {

using nlohmann::json;

namespace fs = std::filesystem;

std::vector<std::string> Dataset::modality_names() const {
    std::vector<std::string> names;
    if (has_tabular()) names.push_back("tabular");
    for (const auto& u : unstructured) names.push_back(u.name);
    std::sort(names.begin(), names.end());
    return names;
}

SplitIndices split(const Dataset& dataset, uint64_t seed) {
    if (dataset.samples.empty()) {
        throw ContractError("split requires a non-empty dataset");
    }

    std::vector<std::vector<size_t>> per_class(dataset.num_classes());
    for (size_t i = 0; i < dataset.samples.size(); ++i) {
        const size_t label = dataset.samples[i].label;
        if (label >= per_class.size()) {
            throw LabelError("label " + std::to_string(label) + " out of range");
        }
        per_class[label].push_back(i);
    }

    SplitIndices out;
    size_t cursor = 0;  // 0 train, 1 val, 2 test; persists across classes
    for (size_t c = 0; c < per_class.size(); ++c) {
        auto& members = per_class[c];
        if (members.size() < 3) {
            throw StratificationError("class " + dataset.class_names[c] + " has " +
                                      std::to_string(members.size()) +
                                      " samples; at least 3 required");
        }
        Rng rng(derive_seed(seed, "split/" + dataset.class_names[c]));
        rng.shuffle(members);

        const size_t n = members.size();
        // Exact targets 0.70n / 0.15n / 0.15n expressed over denominator 20.
        size_t counts[3] = {7 * n / 10, 3 * n / 20, 3 * n / 20};
        long remainders[3] = {static_cast<long>(14 * n % 20), static_cast<long>(3 * n % 20),
                              static_cast<long>(3 * n % 20)};
        size_t extras = n - counts[0] - counts[1] - counts[2];
        while (extras > 0) {
            const long best = *std::max_element(remainders, remainders + 3);
            size_t pick = cursor;
            while (remainders[pick] != best) pick = (pick + 1) % 3;
            counts[pick] += 1;
            remainders[pick] -= 20;
            cursor = (pick + 1) % 3;
            --extras;
        }

        size_t at = 0;
        for (size_t i = 0; i < counts[0]; ++i) out.train.push_back(members[at++]);
        for (size_t i = 0; i < counts[1]; ++i) out.val.push_back(members[at++]);
        for (size_t i = 0; i < counts[2]; ++i) out.test.push_back(members[at++]);
    }
    return out;
}

namespace {

std::string emb_rel_path(const Sample& sample, const std::string& modality) {
    return "emb/" + sample.id + "_" + modality + ".ntf";
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw FormatError("cannot open for writing: " + path.string(), 0);
    }
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) {
        throw FormatError("short write: " + path.string(), 0);
    }
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FormatError("cannot open: " + path.string(), 0);
    }
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

void write_dataset(const Dataset& dataset, const fs::path& dir) {
    fs::create_directories(dir);
    if (!dataset.unstructured.empty()) {
        fs::create_directories(dir / "emb");
    }

    json meta;
    meta["class_names"] = dataset.class_names;
    meta["tabular"] =
        dataset.has_tabular() ? json::parse(schema_to_json(dataset.schema)) : json();
    json uns = json::array();
    for (const auto& u : dataset.unstructured) {
        uns.push_back({{"name", u.name}, {"count", u.count}, {"dim", u.dim}});
    }
    meta["unstructured"] = uns;
    write_text(dir / "schema.json", meta.dump(2) + "\n");

    std::string manifest;
    for (const auto& s : dataset.samples) {
        json rec;
        rec["sample_id"] = s.id;
        rec["label"] = dataset.class_names.at(s.label);
        if (!s.tabular.empty()) {
            rec["tabular_row"] = &s - dataset.samples.data();
        }
        if (!s.embeddings.empty()) {
            json embs;
            for (const auto& [mod, mat] : s.embeddings) {
                embs[mod] = emb_rel_path(s, mod);
            }
            rec["embeddings"] = embs;
        }
        manifest += rec.dump();
        manifest += '\n';
    }
    write_text(dir / "manifest.jsonl", manifest);

    if (dataset.has_tabular()) {
        std::vector<std::vector<std::string>> rows;
        std::vector<std::string> header;
        for (const auto& c : dataset.schema.columns) header.push_back(c.name);
        rows.push_back(header);
        for (const auto& s : dataset.samples) {
            rows.push_back(s.tabular.empty() ? std::vector<std::string>(header.size())
                                             : s.tabular);
        }
        write_text(dir / "tabular.csv", format_csv(rows));
    }

    for (const auto& s : dataset.samples) {
        for (const auto& [mod, mat] : s.embeddings) {
            NtfTensor t;
            t.dims = {mat.rows, mat.cols};
            t.values = mat.values;
            write_ntf(t, dir / emb_rel_path(s, mod));
        }
    }
}

Dataset load_dataset(const fs::path& dir) {
    Dataset ds;

    json meta;
    try {
        meta = json::parse(read_text(dir / "schema.json"));
    } catch (const json::parse_error& e) {
        throw SchemaError(std::string("schema.json is not valid JSON: ") + e.what());
    }
    ds.class_names = meta.at("class_names").get<std::vector<std::string>>();
    if (ds.class_names.empty()) {
        throw SchemaError("class_names is empty");
    }
    if (!meta.at("tabular").is_null()) {
        ds.schema = schema_from_json(meta.at("tabular").dump());
    }
    for (const auto& ju : meta.at("unstructured")) {
        ds.unstructured.push_back({ju.at("name").get<std::string>(),
                                   ju.at("count").get<size_t>(), ju.at("dim").get<size_t>()});
    }

    std::map<std::string, size_t> label_index;
    for (size_t i = 0; i < ds.class_names.size(); ++i) label_index[ds.class_names[i]] = i;
    std::map<std::string, const UnstructuredSpec*> unstructured_index;
    for (const auto& u : ds.unstructured) unstructured_index[u.name] = &u;

    std::vector<std::vector<std::string>> tab_rows;
    if (ds.has_tabular()) {
        auto rows = parse_csv(read_text(dir / "tabular.csv"));
        if (rows.empty()) {
            throw SchemaError("tabular.csv has no header row");
        }
        std::vector<std::string> expected;
        for (const auto& c : ds.schema.columns) expected.push_back(c.name);
        if (rows[0] != expected) {
            throw SchemaError("tabular.csv header does not match schema columns");
        }
        tab_rows.assign(rows.begin() + 1, rows.end());
        for (const auto& r : tab_rows) {
            if (r.size() != expected.size()) {
                throw SchemaError("tabular.csv row width does not match schema");
            }
        }
    }

    std::istringstream manifest(read_text(dir / "manifest.jsonl"));
    std::string line;
    size_t line_no = 0;
    while (std::getline(manifest, line)) {
        ++line_no;
        if (line.empty()) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::parse_error& e) {
            throw SchemaError("manifest line " + std::to_string(line_no) +
                              " is not valid JSON: " + e.what());
        }
        Sample s;
        s.id = rec.at("sample_id").get<std::string>();
        const std::string label_name = rec.at("label").get<std::string>();
        auto it = label_index.find(label_name);
        if (it == label_index.end()) {
            throw LabelError("unknown label \"" + label_name + "\" at manifest line " +
                             std::to_string(line_no));
        }
        s.label = it->second;
        if (rec.contains("tabular_row")) {
            const size_t r = rec.at("tabular_row").get<size_t>();
            if (!ds.has_tabular() || r >= tab_rows.size()) {
                throw SchemaError("tabular_row " + std::to_string(r) +
                                  " out of range at manifest line " + std::to_string(line_no));
            }
            s.tabular = tab_rows[r];
        }
        if (rec.contains("embeddings")) {
            for (const auto& [mod, jpath] : rec.at("embeddings").items()) {
                auto uit = unstructured_index.find(mod);
                if (uit == unstructured_index.end()) {
                    throw SchemaError("modality \"" + mod + "\" not declared in schema");
                }
                const NtfTensor t = read_ntf(dir / jpath.get<std::string>());
                if (t.dims.size() != 2) {
                    throw SchemaError("embedding tensor for " + s.id + "/" + mod +
                                      " must be rank 2");
                }
                if (t.dims[1] != uit->second->dim) {
                    throw SchemaError("embedding width " + std::to_string(t.dims[1]) +
                                      " does not match declared dim " +
                                      std::to_string(uit->second->dim) + " for modality " + mod);
                }
                s.embeddings[mod] = {t.dims[0], t.dims[1], t.values};
            }
        }
        ds.samples.push_back(std::move(s));
    }
    if (ds.samples.empty()) {
        throw SchemaError("manifest.jsonl lists no samples");
    }
    return ds;
}

}  // namespace magnum
