#pragma once

#include <cstdint>

#include "syswatch/attention.hpp"
#include "syswatch/trace.hpp"

namespace syswatch {

// Architecture description for the window classifier. Defaults are the
// desk-scale configuration: a two-layer, four-head encoder that trains in
// minutes on a CPU while exercising every attention pattern.
struct ModelConfig {
    int32_t context = 512;     // window length C, CLS included
    int32_t vocab_size = 3;    // V, reserved tokens included
    int32_t embed_dim = 64;    // d
    int32_t num_layers = 2;    // L
    int32_t num_heads = 4;     // H
    int32_t num_classes = kNumClasses;
    int32_t ffn_dim = 0;       // 0 -> 4*embed_dim
    AttentionPattern pattern = DensePattern{};
    float dropout = 0.1f;
    uint64_t init_seed = 1;

    int32_t ffn() const { return ffn_dim > 0 ? ffn_dim : 4 * embed_dim; }

    // Throws InvalidConfig / InvalidPattern.
    void validate() const;
};

}  // namespace syswatch
