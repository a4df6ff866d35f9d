#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "magnum/config.hpp"
#include "magnum/dataset.hpp"
#include "magnum/fusion.hpp"
#include "magnum/lowlevel.hpp"
#include "magnum/midlevel.hpp"
#include "magnum/param.hpp"
#include "magnum/rng.hpp"
#include "magnum/tensor.hpp"

namespace magnum {

// The full pipeline for one sample: per-modality hidden states, common-space
// projection, graph compression to one vector per modality, gated fusion,
// linear classifier. Parameters are registered in a deterministic order so a
// (config, seed) pair fully determines the initialization.
class Model {
  public:
    // `schema` must already carry normalization stats when tabular columns
    // exist. `unstructured` lists the embedding modalities with their widths.
    Model(const RunConfig& cfg, const TabularSchema& schema,
          const std::vector<UnstructuredSpec>& unstructured, std::size_t classes,
          ParamRegistry& params, Rng& rng);

    Tensor logits(const Sample& sample) const;  // [1 x C]
    Tensor loss(const Sample& sample) const;    // scalar
    std::size_t predict(const Sample& sample) const;

    // Pre-compression node count and graph trace for one modality.
    Compressor::Trace trace(const Sample& sample, const std::string& modality) const;

    const std::vector<std::string>& modalities() const { return active_; }
    std::size_t classes() const { return classes_; }
    std::size_t common_dim() const { return cfg_.common_dim; }

    // The fitted schema the tabular path was built with; empty when the
    // model has no tabular modality.
    TabularSchema schema() const {
        return tabular_.encoder ? tabular_.encoder->schema() : TabularSchema{};
    }

  private:
    struct UnstructuredPath {
        std::string name;
        std::unique_ptr<PromptedEncoder> encoder;
        std::unique_ptr<Projection> proj;
        std::unique_ptr<Compressor> comp;
    };
    struct TabularPath {
        std::unique_ptr<TabularEncoder> encoder;
        std::unique_ptr<Projection> proj;
        std::unique_ptr<Compressor> comp;
    };

    // Projected common-space states for one modality, or an empty optional
    // tensor when the sample lacks it.
    bool modality_states(const Sample& sample, const std::string& modality, Tensor& out) const;
    Tensor fused(const Sample& sample) const;

    RunConfig cfg_;
    std::size_t classes_;
    std::vector<std::string> active_;  // lexicographic
    TabularPath tabular_;
    std::vector<UnstructuredPath> unstructured_;
    std::unique_ptr<GatedFusion> fusion_;
    std::unique_ptr<ClassifierHead> head_;
};

}  // namespace magnum
