#include "magnum/fusion.hpp"

#include <algorithm>

#include "magnum/errors.hpp"
#include "magnum/ops.hpp"

namespace magnum {

GatedFusion::GatedFusion(const std::string& name, std::vector<std::string> modalities,
                         std::size_t dim, ParamRegistry& params, Rng& rng)
    : modalities_(std::move(modalities)), dim_(dim) {
    if (modalities_.empty()) throw ContractError("fusion needs at least one modality");
    if (dim_ == 0) throw ContractError("fusion width must be positive");
    std::sort(modalities_.begin(), modalities_.end());
    for (std::size_t m = 1; m < modalities_.size(); ++m) {
        if (modalities_[m] == modalities_[m - 1])
            throw ContractError("duplicate modality name: " + modalities_[m]);
    }

    const std::size_t gate_in = modalities_.size() * dim_;
    for (const std::string& mod : modalities_) {
        const std::string base = name + "/" + mod;
        Unit u;
        u.value_w = params.add(base + "/value/w", xavier_uniform(dim_, dim_, rng));
        u.value_b = params.add(base + "/value/b", Tensor::zeros({1, dim_}, true));
        u.gate_w = params.add(base + "/gate/w", xavier_uniform(gate_in, dim_, rng));
        u.gate_b = params.add(base + "/gate/b", Tensor::zeros({1, dim_}, true));
        units_.push_back(u);
    }
}

GatedFusion::Trace GatedFusion::fuse_traced(const std::map<std::string, Tensor>& inputs) const {
    for (const auto& [mod, t] : inputs) {
        if (!std::binary_search(modalities_.begin(), modalities_.end(), mod))
            throw ContractError("unknown modality: " + mod);
        if (t.shape() != Shape{1, dim_})
            throw DimensionError("modality " + mod + " expected [1x" + std::to_string(dim_) +
                                 "], got " + shape_str(t.shape()));
    }

    // Fixed-width slots so the gate maps keep one input layout regardless of
    // which modalities actually arrived.
    const Tensor hole = Tensor::zeros({1, dim_});
    std::vector<Tensor> slot(modalities_.size(), hole);
    std::vector<bool> present(modalities_.size(), false);
    for (std::size_t m = 0; m < modalities_.size(); ++m) {
        auto it = inputs.find(modalities_[m]);
        if (it != inputs.end()) {
            slot[m] = it->second;
            present[m] = true;
        }
    }

    Trace trace;
    Tensor fused = Tensor::zeros({1, dim_});
    for (std::size_t m = 0; m < modalities_.size(); ++m) {
        if (!present[m]) continue;  // absent modality: gate fully closed
        const Unit& u = units_[m];

        std::vector<Tensor> parts;
        parts.push_back(slot[m]);
        for (std::size_t o = 0; o < modalities_.size(); ++o) {
            if (o != m) parts.push_back(slot[o]);
        }
        const Tensor gate_in = parts.size() == 1 ? parts[0] : concat(parts, 1);

        const Tensor x = tanh(add_rowwise(matmul(slot[m], u.value_w), u.value_b));
        const Tensor sigma = sigmoid(add_rowwise(matmul(gate_in, u.gate_w), u.gate_b));
        fused = add(fused, mul(x, sigma));
        trace.values.emplace(modalities_[m], x);
        trace.gates.emplace(modalities_[m], sigma);
    }
    trace.fused = fused;
    return trace;
}

Tensor GatedFusion::fuse(const std::map<std::string, Tensor>& inputs) const {
    return fuse_traced(inputs).fused;
}

ClassifierHead::ClassifierHead(const std::string& name, std::size_t dim, std::size_t classes,
                               ParamRegistry& params, Rng& rng)
    : classes_(classes) {
    if (classes_ < 2) throw ContractError("classifier needs at least two classes");
    w_ = params.add(name + "/w", xavier_uniform(dim, classes, rng));
    b_ = params.add(name + "/b", Tensor::zeros({1, classes}, true));
}

Tensor ClassifierHead::logits(const Tensor& fused) const {
    return add_rowwise(matmul(fused, w_), b_);
}

Tensor classify_loss(const Tensor& logits, std::size_t label) {
    if (logits.rank() != 2 || logits.dim(0) != 1)
        throw DimensionError("logits must be [1xC], got " + shape_str(logits.shape()));
    if (label >= logits.dim(1))
        throw LabelError("label " + std::to_string(label) + " out of range for " +
                         std::to_string(logits.dim(1)) + " classes");
    return scale(pick(log_softmax(logits, 1), label), -1.0);
}

}  // namespace magnum
