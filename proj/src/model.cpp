#include "magnum/model.hpp"

#include <algorithm>

#include "magnum/errors.hpp"
#include "magnum/ops.hpp"

namespace magnum {

Model::Model(const RunConfig& cfg, const TabularSchema& schema,
             const std::vector<UnstructuredSpec>& unstructured, std::size_t classes,
             ParamRegistry& params, Rng& rng)
    : cfg_(cfg), classes_(classes) {
    std::vector<std::string> available;
    if (!schema.columns.empty()) available.push_back("tabular");
    for (const auto& u : unstructured) available.push_back(u.name);
    std::sort(available.begin(), available.end());

    const std::vector<std::string> filter = cfg.modality_filter();
    if (filter.empty()) {
        active_ = available;
    } else {
        for (const std::string& name : filter) {
            if (std::find(available.begin(), available.end(), name) == available.end())
                throw ConfigError("model.modalities references unknown modality: " + name);
        }
        active_ = filter;
        std::sort(active_.begin(), active_.end());
        active_.erase(std::unique(active_.begin(), active_.end()), active_.end());
    }
    if (active_.empty()) throw ContractError("model has no modalities");

    for (const std::string& mod : active_) {
        const std::string base = "model/" + mod;
        if (mod == "tabular") {
            if (!schema.fitted())
                throw ContractError("tabular schema lacks normalization stats");
            tabular_.encoder =
                std::make_unique<TabularEncoder>(base + "/enc", schema, cfg.tabular_dim, params, rng);
            tabular_.proj = std::make_unique<Projection>(base + "/proj", cfg.tabular_dim,
                                                         cfg.common_dim, params, rng);
            tabular_.comp =
                std::make_unique<Compressor>(base + "/mid", cfg.common_dim, cfg.knn_k,
                                             cfg.coarsen_rounds, cfg.attn_heads, params, rng);
            continue;
        }
        const auto spec = std::find_if(unstructured.begin(), unstructured.end(),
                                       [&](const UnstructuredSpec& u) { return u.name == mod; });
        UnstructuredPath path;
        path.name = mod;
        if (spec->dim != cfg.unstructured_dim)
            throw ContractError("modality " + mod + " embedding width " +
                                std::to_string(spec->dim) + " != configured " +
                                std::to_string(cfg.unstructured_dim));
        path.encoder = std::make_unique<PromptedEncoder>(base + "/enc", cfg.unstructured_dim,
                                                         cfg.encoder_layers, cfg.encoder_heads,
                                                         cfg.prompt_len, params, rng);
        path.proj = std::make_unique<Projection>(base + "/proj", cfg.unstructured_dim,
                                                 cfg.common_dim, params, rng);
        path.comp = std::make_unique<Compressor>(base + "/mid", cfg.common_dim, cfg.knn_k,
                                                 cfg.coarsen_rounds, cfg.attn_heads, params, rng);
        unstructured_.push_back(std::move(path));
    }

    fusion_ = std::make_unique<GatedFusion>("model/mgf", active_, cfg.common_dim, params, rng);
    head_ = std::make_unique<ClassifierHead>("model/head", cfg.common_dim, classes_, params, rng);
}

bool Model::modality_states(const Sample& sample, const std::string& modality,
                            Tensor& out) const {
    if (modality == "tabular") {
        if (!tabular_.encoder) throw ContractError("model has no tabular path");
        if (sample.tabular.empty()) return false;
        out = tabular_.proj->apply(tabular_.encoder->encode_row(sample.tabular));
        return true;
    }
    const auto path = std::find_if(unstructured_.begin(), unstructured_.end(),
                                   [&](const UnstructuredPath& p) { return p.name == modality; });
    if (path == unstructured_.end())
        throw ContractError("model has no modality named " + modality);
    const auto emb = sample.embeddings.find(modality);
    if (emb == sample.embeddings.end()) return false;
    const EmbMatrix& m = emb->second;
    const Tensor raw = Tensor::from_values({m.rows, m.cols}, m.values);
    out = path->proj->apply(path->encoder->encode(raw));
    return true;
}

Tensor Model::fused(const Sample& sample) const {
    std::map<std::string, Tensor> per_modality;
    for (const std::string& mod : active_) {
        Tensor states;
        if (!modality_states(sample, mod, states)) continue;
        const Compressor& comp = mod == "tabular" ? *tabular_.comp
                                                  : *std::find_if(unstructured_.begin(),
                                                                  unstructured_.end(),
                                                                  [&](const UnstructuredPath& p) {
                                                                      return p.name == mod;
                                                                  })
                                                         ->comp;
        per_modality.emplace(mod, comp.compress(states));
    }
    return fusion_->fuse(per_modality);
}

Tensor Model::logits(const Sample& sample) const { return head_->logits(fused(sample)); }

Tensor Model::loss(const Sample& sample) const {
    return classify_loss(logits(sample), sample.label);
}

std::size_t Model::predict(const Sample& sample) const {
    const Tensor out = logits(sample);
    std::size_t best = 0;
    for (std::size_t c = 1; c < classes_; ++c) {
        if (out.at(0, c) > out.at(0, best)) best = c;
    }
    return best;
}

Compressor::Trace Model::trace(const Sample& sample, const std::string& modality) const {
    if (std::find(active_.begin(), active_.end(), modality) == active_.end())
        throw ContractError("model has no modality named " + modality);
    Tensor states;
    if (!modality_states(sample, modality, states))
        throw ContractError("sample " + sample.id + " lacks modality " + modality);
    const Compressor& comp =
        modality == "tabular"
            ? *tabular_.comp
            : *std::find_if(unstructured_.begin(), unstructured_.end(),
                            [&](const UnstructuredPath& p) { return p.name == modality; })
                   ->comp;
    return comp.compress_traced(states);
}

}  // namespace magnum
