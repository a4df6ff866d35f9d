#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "magnum/dataset.hpp"
#include "magnum/param.hpp"
#include "magnum/schema.hpp"
#include "magnum/tensor.hpp"

namespace magnum {

// A modality's states after projection to the common width d: one row per
// hidden state.
struct HiddenSet {
    std::string modality;
    Tensor states;  // I x d, I >= 1
};

// Frozen transformer stack with learnable prompts prepended to the input.
// Layer l maps a (L+1+J) x width sequence through multi-head self-attention
// and a tanh FFN, both with residual connections. Only the prompts train.
class PromptedEncoder {
  public:
    PromptedEncoder(const std::string& name, size_t width, size_t layers, size_t heads,
                    size_t prompt_count, ParamRegistry& params, Rng& rng);

    // embeddings: J x width. Returns the prompt states plus the class-token
    // state after the full stack: (prompt_count+1) x width.
    Tensor encode(const Tensor& embeddings) const;

    size_t width() const { return width_; }
    size_t prompt_count() const { return prompt_count_; }

  private:
    struct Layer {
        Tensor wq, wk, wv, wo;  // width x width
        Tensor w1, b1, w2, b2;  // FFN: width -> 2*width -> width
    };

    size_t width_;
    size_t heads_;
    size_t prompt_count_;
    Tensor prompts_;  // prompt_count x width, trainable
    Tensor cls_;      // 1 x width, frozen
    std::vector<Layer> layers_;
};

// Fits per-numeric-column mean/std on the training indices (population
// variance; constant columns keep stdev 1 so their z-score is 0).
void fit_normalization(TabularSchema& schema, const Dataset& dataset,
                       const std::vector<size_t>& train_indices);

// Normalizes one raw cell into the numeric vector its column FFN consumes:
// a 1-vector z-score for numeric columns, a one-hot over vocabulary+UNKNOWN
// for categorical ones. Missing numerics impute to the training mean
// (z-score 0); unseen or missing categories map to the UNKNOWN slot.
std::vector<double> encode_column(const TabularSchema& schema, size_t column,
                                  const std::string& raw);

// One FFN per column (input width -> d_s tanh -> d_s), applied to the
// normalized column values; row output is N x d_s in schema order.
class TabularEncoder {
  public:
    TabularEncoder(const std::string& name, const TabularSchema& schema, size_t d_s,
                   ParamRegistry& params, Rng& rng);

    Tensor encode_row(const std::vector<std::string>& row) const;

    const TabularSchema& schema() const { return schema_; }
    size_t out_dim() const { return d_s_; }

  private:
    struct ColumnFfn {
        Tensor w1, b1, w2, b2;
    };

    TabularSchema schema_;
    size_t d_s_;
    std::vector<ColumnFfn> ffns_;
};

// Modality-specific map to the common width: in_dim -> out_dim tanh ->
// out_dim, applied row-wise so the state count is preserved.
class Projection {
  public:
    Projection(const std::string& name, size_t in_dim, size_t out_dim, ParamRegistry& params,
               Rng& rng);

    Tensor apply(const Tensor& states) const;

    size_t in_dim() const { return in_dim_; }
    size_t out_dim() const { return out_dim_; }

  private:
    size_t in_dim_;
    size_t out_dim_;
    Tensor w1_, b1_, w2_, b2_;
};

// Reads a rank-2 NTF file as a frozen hidden-state sequence.
Tensor ingest_embeddings(const std::filesystem::path& path);

}  // namespace magnum
