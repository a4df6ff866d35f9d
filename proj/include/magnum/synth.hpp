#pragma once

#include <cstdint>

#include "magnum/dataset.hpp"

namespace magnum {

enum class SignalMode { Unimodal, XorCrossModal };

// Generator spec. `modalities` counts the tabular modality plus the
// embedding streams (so 2 = tabular + one stream). In xor mode the label is
// the XOR of a bit planted in the sign of one tabular column and a bit
// planted in the mean of embedding channel 0, which leaves every single
// modality uninformative on its own.
struct SynthSpec {
    size_t modalities = 2;
    size_t samples = 2000;
    size_t classes = 2;
    SignalMode signal_mode = SignalMode::XorCrossModal;
    double noise_std = 0.1;
    uint64_t seed = 7;
    size_t embedding_count = 4;  // rows per embedding stream
    size_t embedding_dim = 32;   // width of each embedding
};

Dataset gen_synth(const SynthSpec& spec);

}  // namespace magnum
