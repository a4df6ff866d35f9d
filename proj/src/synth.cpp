#include "magnum/synth.hpp"

#include <cstdio>
#include <string>

#include "magnum/errors.hpp"
#include "magnum/rng.hpp"

namespace magnum {

namespace {

constexpr double kSignalOffset = 1.0;
constexpr double kDistractorStd = 0.25;
const char* kCategories[] = {"alpha", "beta", "gamma"};

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string sample_id(size_t i, size_t total) {
    size_t width = 1;
    for (size_t t = total; t >= 10; t /= 10) ++width;
    std::string digits = std::to_string(i);
    return "s" + std::string(width - std::min(width, digits.size()), '0') + digits;
}

}  // namespace

Dataset gen_synth(const SynthSpec& spec) {
    if (spec.samples < 20 * spec.classes) {
        throw ContractError("synth spec requires samples >= 20 * classes");
    }
    if (spec.classes < 2) {
        throw ContractError("synth spec requires at least 2 classes");
    }
    if (spec.modalities < 1) {
        throw ContractError("synth spec requires at least 1 modality");
    }
    if (spec.signal_mode == SignalMode::XorCrossModal) {
        if (spec.classes != 2) {
            throw ContractError("xor_cross_modal requires exactly 2 classes");
        }
        if (spec.modalities < 2) {
            throw ContractError("xor_cross_modal requires at least 2 modalities");
        }
    }
    if (spec.embedding_count == 0 || spec.embedding_dim == 0) {
        throw ContractError("embedding_count and embedding_dim must be positive");
    }

    Dataset ds;
    for (size_t c = 0; c < spec.classes; ++c) ds.class_names.push_back("c" + std::to_string(c));

    ds.schema.columns = {
        {"t_signal", ColumnKind::Numeric, {}},
        {"t_noise", ColumnKind::Numeric, {}},
        {"t_cat", ColumnKind::Categorical, {kCategories[0], kCategories[1], kCategories[2]}},
    };
    for (size_t m = 0; m + 1 < spec.modalities; ++m) {
        ds.unstructured.push_back(
            {"emb" + std::to_string(m), spec.embedding_count, spec.embedding_dim});
    }

    Rng rng(derive_seed(spec.seed, "synth"));

    // Planted structure per sample: in xor mode a (bit_t, bit_u) pair, in
    // unimodal mode a class index. Striped assignment keeps the counts exactly
    // balanced; the shuffle decides which sample gets which.
    std::vector<size_t> planted(spec.samples);
    for (size_t i = 0; i < spec.samples; ++i) {
        planted[i] = spec.signal_mode == SignalMode::XorCrossModal ? i % 4 : i % spec.classes;
    }
    rng.shuffle(planted);

    for (size_t i = 0; i < spec.samples; ++i) {
        Sample s;
        s.id = sample_id(i, spec.samples);

        double tab_signal = 0.0;
        bool bit_u = false;
        if (spec.signal_mode == SignalMode::XorCrossModal) {
            const bool bit_t = planted[i] & 1;
            bit_u = planted[i] & 2;
            s.label = bit_t != bit_u ? 1 : 0;
            tab_signal = (bit_t ? kSignalOffset : -kSignalOffset) + spec.noise_std * rng.normal();
        } else {
            s.label = planted[i];
            const double center =
                2.0 * static_cast<double>(s.label) - static_cast<double>(spec.classes - 1);
            tab_signal = center + spec.noise_std * rng.normal();
        }

        s.tabular = {fmt_double(tab_signal), fmt_double(rng.normal()),
                     kCategories[rng.below(3)]};

        for (const auto& u : ds.unstructured) {
            EmbMatrix mat;
            mat.rows = u.count;
            mat.cols = u.dim;
            mat.values.resize(u.count * u.dim);
            const bool carries_signal =
                spec.signal_mode == SignalMode::XorCrossModal && u.name == "emb0";
            for (size_t r = 0; r < u.count; ++r) {
                for (size_t c = 0; c < u.dim; ++c) {
                    double v = kDistractorStd * rng.normal();
                    if (carries_signal && c == 0) {
                        v = (bit_u ? kSignalOffset : -kSignalOffset) +
                            spec.noise_std * rng.normal();
                    }
                    mat.values[r * u.dim + c] = v;
                }
            }
            s.embeddings[u.name] = std::move(mat);
        }
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

}  // namespace magnum
