#include "magnum/lowlevel.hpp"

#include <cmath>
#include <cstdlib>
#include <string>

#include "magnum/errors.hpp"
#include "magnum/ntf.hpp"
#include "magnum/ops.hpp"

namespace magnum {

namespace {

// Full-string parse; anything unparseable or non-finite counts as missing.
bool try_parse_double(const std::string& raw, double& out) {
    if (raw.empty()) return false;
    const char* begin = raw.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin) return false;
    while (*end == ' ' || *end == '\t') ++end;
    if (*end != '\0') return false;
    if (!std::isfinite(v)) return false;
    out = v;
    return true;
}

}  // namespace

PromptedEncoder::PromptedEncoder(const std::string& name, size_t width, size_t layers,
                                 size_t heads, size_t prompt_count, ParamRegistry& params,
                                 Rng& rng)
    : width_(width), heads_(heads), prompt_count_(prompt_count) {
    if (width == 0 || heads == 0 || width % heads != 0) {
        throw DimensionError("encoder width " + std::to_string(width) +
                             " must be a positive multiple of heads " + std::to_string(heads));
    }
    if (prompt_count == 0) {
        throw ContractError("encoder needs at least one prompt");
    }
    prompts_ = params.add(name + "/prompts",
                          rand_uniform({prompt_count, width}, -0.1, 0.1, rng, true), false);
    cls_ = params.add(name + "/cls", rand_uniform({1, width}, -0.1, 0.1, rng, false), true);
    for (size_t l = 0; l < layers; ++l) {
        const std::string p = name + "/layer" + std::to_string(l);
        Layer lay;
        lay.wq = params.add(p + "/wq", xavier_uniform(width, width, rng, false), true);
        lay.wk = params.add(p + "/wk", xavier_uniform(width, width, rng, false), true);
        lay.wv = params.add(p + "/wv", xavier_uniform(width, width, rng, false), true);
        lay.wo = params.add(p + "/wo", xavier_uniform(width, width, rng, false), true);
        lay.w1 = params.add(p + "/ffn_w1", xavier_uniform(width, 2 * width, rng, false), true);
        lay.b1 = params.add(p + "/ffn_b1", Tensor::zeros({2 * width}), true);
        lay.w2 = params.add(p + "/ffn_w2", xavier_uniform(2 * width, width, rng, false), true);
        lay.b2 = params.add(p + "/ffn_b2", Tensor::zeros({width}), true);
        layers_.push_back(std::move(lay));
    }
}

Tensor PromptedEncoder::encode(const Tensor& embeddings) const {
    if (embeddings.rank() != 2 || embeddings.dim(1) != width_) {
        throw DimensionError("embedding sequence " + shape_str(embeddings.shape()) +
                             " does not match encoder width " + std::to_string(width_));
    }
    if (embeddings.dim(0) == 0) {
        throw DimensionError("embedding sequence is empty");
    }

    Tensor seq = concat({prompts_, cls_, embeddings}, 0);
    const size_t head_dim = width_ / heads_;
    for (const Layer& lay : layers_) {
        const Tensor q = matmul(seq, lay.wq);
        const Tensor k = matmul(seq, lay.wk);
        const Tensor v = matmul(seq, lay.wv);
        std::vector<Tensor> ctx;
        for (size_t h = 0; h < heads_; ++h) {
            const size_t lo = h * head_dim, hi = lo + head_dim;
            const Tensor qh = slice(q, 1, lo, hi);
            const Tensor kh = slice(k, 1, lo, hi);
            const Tensor vh = slice(v, 1, lo, hi);
            const Tensor scores =
                scale(matmul(qh, transpose(kh)), 1.0 / std::sqrt(static_cast<double>(head_dim)));
            ctx.push_back(matmul(softmax(scores, 1), vh));
        }
        const Tensor merged = ctx.size() == 1 ? ctx[0] : concat(ctx, 1);
        seq = add(seq, matmul(merged, lay.wo));

        const Tensor hidden = tanh(add_rowwise(matmul(seq, lay.w1), lay.b1));
        seq = add(seq, add_rowwise(matmul(hidden, lay.w2), lay.b2));
    }
    return slice(seq, 0, 0, prompt_count_ + 1);
}

void fit_normalization(TabularSchema& schema, const Dataset& dataset,
                       const std::vector<size_t>& train_indices) {
    schema.normalization.assign(schema.columns.size(), NumericStats{});
    for (size_t c = 0; c < schema.columns.size(); ++c) {
        if (schema.columns[c].kind != ColumnKind::Numeric) continue;
        double sum = 0.0;
        size_t n = 0;
        std::vector<double> seen;
        for (size_t i : train_indices) {
            const Sample& s = dataset.samples.at(i);
            if (s.tabular.size() != schema.columns.size()) continue;
            double v;
            if (try_parse_double(s.tabular[c], v)) {
                sum += v;
                seen.push_back(v);
                ++n;
            }
        }
        if (n == 0) continue;
        const double mean = sum / static_cast<double>(n);
        double var = 0.0;
        for (double v : seen) var += (v - mean) * (v - mean);
        var /= static_cast<double>(n);
        const double stdev = std::sqrt(var);
        schema.normalization[c] = {mean, stdev > 0.0 ? stdev : 1.0};
    }
}

std::vector<double> encode_column(const TabularSchema& schema, size_t column,
                                  const std::string& raw) {
    if (column >= schema.columns.size()) {
        throw SchemaError("column index " + std::to_string(column) + " out of range");
    }
    const ColumnSpec& spec = schema.columns[column];
    if (spec.kind == ColumnKind::Numeric) {
        if (!schema.fitted()) {
            throw ContractError("normalization statistics not fitted for numeric columns");
        }
        const NumericStats& st = schema.normalization[column];
        double v;
        if (!try_parse_double(raw, v)) {
            return {0.0};  // missing value imputes to the training mean
        }
        return {(v - st.mean) / st.stdev};
    }
    std::vector<double> one_hot(spec.vocabulary.size() + 1, 0.0);
    size_t idx = spec.vocabulary.size();  // UNKNOWN slot
    for (size_t i = 0; i < spec.vocabulary.size(); ++i) {
        if (spec.vocabulary[i] == raw) {
            idx = i;
            break;
        }
    }
    one_hot[idx] = 1.0;
    return one_hot;
}

TabularEncoder::TabularEncoder(const std::string& name, const TabularSchema& schema, size_t d_s,
                               ParamRegistry& params, Rng& rng)
    : schema_(schema), d_s_(d_s) {
    if (schema_.columns.empty()) {
        throw ContractError("tabular encoder needs at least one column");
    }
    bool any_numeric = false;
    for (const auto& c : schema_.columns) any_numeric |= c.kind == ColumnKind::Numeric;
    if (any_numeric && !schema_.fitted()) {
        throw ContractError("tabular encoder requires fitted normalization statistics");
    }
    for (const auto& c : schema_.columns) {
        const size_t in_dim =
            c.kind == ColumnKind::Numeric ? 1 : c.vocabulary.size() + 1;
        const std::string p = name + "/" + c.name;
        ColumnFfn f;
        f.w1 = params.add(p + "/w1", xavier_uniform(in_dim, d_s, rng, true), false);
        f.b1 = params.add(p + "/b1", Tensor::zeros({d_s}, true), false);
        f.w2 = params.add(p + "/w2", xavier_uniform(d_s, d_s, rng, true), false);
        f.b2 = params.add(p + "/b2", Tensor::zeros({d_s}, true), false);
        ffns_.push_back(std::move(f));
    }
}

Tensor TabularEncoder::encode_row(const std::vector<std::string>& row) const {
    if (row.size() != schema_.columns.size()) {
        throw SchemaError("row has " + std::to_string(row.size()) + " cells, schema expects " +
                          std::to_string(schema_.columns.size()));
    }
    std::vector<Tensor> states;
    for (size_t c = 0; c < row.size(); ++c) {
        std::vector<double> in = encode_column(schema_, c, row[c]);
        const size_t in_width = in.size();
        const Tensor x = Tensor::from_values({1, in_width}, std::move(in));
        const ColumnFfn& f = ffns_[c];
        const Tensor hidden = tanh(add_rowwise(matmul(x, f.w1), f.b1));
        states.push_back(add_rowwise(matmul(hidden, f.w2), f.b2));
    }
    return states.size() == 1 ? states[0] : concat(states, 0);
}

Projection::Projection(const std::string& name, size_t in_dim, size_t out_dim,
                       ParamRegistry& params, Rng& rng)
    : in_dim_(in_dim), out_dim_(out_dim) {
    if (in_dim == 0 || out_dim == 0) {
        throw DimensionError("projection dims must be positive");
    }
    w1_ = params.add(name + "/w1", xavier_uniform(in_dim, out_dim, rng, true), false);
    b1_ = params.add(name + "/b1", Tensor::zeros({out_dim}, true), false);
    w2_ = params.add(name + "/w2", xavier_uniform(out_dim, out_dim, rng, true), false);
    b2_ = params.add(name + "/b2", Tensor::zeros({out_dim}, true), false);
}

Tensor Projection::apply(const Tensor& states) const {
    if (states.rank() != 2 || states.dim(1) != in_dim_) {
        throw DimensionError("projection input " + shape_str(states.shape()) +
                             " does not match declared width " + std::to_string(in_dim_));
    }
    const Tensor hidden = tanh(add_rowwise(matmul(states, w1_), b1_));
    return add_rowwise(matmul(hidden, w2_), b2_);
}

Tensor ingest_embeddings(const std::filesystem::path& path) {
    NtfTensor t = read_ntf(path);
    if (t.dims.size() != 2) {
        throw FormatError("embedding file must hold a rank-2 tensor, got rank " +
                              std::to_string(t.dims.size()),
                          7);
    }
    return Tensor::from_values({t.dims[0], t.dims[1]}, std::move(t.values));
}

}  // namespace magnum
