#pragma once

#include <map>
#include <string>
#include <vector>

#include "magnum/param.hpp"
#include "magnum/rng.hpp"
#include "magnum/tensor.hpp"

namespace magnum {

// Gated combination of per-modality vectors into one common-width embedding.
// Each modality owns a value map (d -> d, tanh) and a gate map (M*d -> d,
// sigmoid) whose input is that modality's vector followed by every other
// modality's vector in lexicographic name order. Gated vectors are summed.
class GatedFusion {
public:
    GatedFusion(const std::string& name, std::vector<std::string> modalities,
                std::size_t dim, ParamRegistry& params, Rng& rng);

    struct Trace {
        Tensor fused;                          // [1 x d]
        std::map<std::string, Tensor> values;  // x_m, present modalities only
        std::map<std::string, Tensor> gates;   // sigma_m, present modalities only
    };

    // Inputs are keyed by modality name; each must be [1 x d]. A modality
    // that was configured but is absent from `inputs` contributes nothing,
    // and its slot in the other gates' inputs is zero-filled.
    Tensor fuse(const std::map<std::string, Tensor>& inputs) const;
    Trace fuse_traced(const std::map<std::string, Tensor>& inputs) const;

    const std::vector<std::string>& modalities() const { return modalities_; }
    std::size_t dim() const { return dim_; }

private:
    struct Unit {
        Tensor value_w, value_b;
        Tensor gate_w, gate_b;
    };

    std::vector<std::string> modalities_;  // lexicographic
    std::size_t dim_;
    std::vector<Unit> units_;
};

// Linear map from the fused embedding to class logits.
class ClassifierHead {
public:
    ClassifierHead(const std::string& name, std::size_t dim, std::size_t classes,
                   ParamRegistry& params, Rng& rng);

    Tensor logits(const Tensor& fused) const;  // [1 x C]
    std::size_t classes() const { return classes_; }

private:
    std::size_t classes_;
    Tensor w_, b_;
};

// Negative log likelihood of class `label` under softmax(logits).
Tensor classify_loss(const Tensor& logits, std::size_t label);

}  // namespace magnum
