#pragma once

#include <array>
#include <span>
#include <vector>

#include "syswatch/model_config.hpp"
#include "syswatch/nn.hpp"
#include "syswatch/tokenizer.hpp"

namespace syswatch {

// Per-window class distribution over the five behavior classes.
using ProbabilityVector = std::array<double, kNumClasses>;

ProbabilityVector softmax_probs(const nn::RowVec<float>& logits);

// Transformer encoder classifier: token + learned positional embeddings,
// masked multi-head attention with residual/layer-norm sublayers, and a
// softmax head read from the CLS position.
class ClassifierModel {
public:
    explicit ClassifierModel(const ModelConfig& cfg);
    ClassifierModel(const ModelConfig& cfg, nn::NetParams<float> params);

    const ModelConfig& config() const { return cfg_; }
    const AttentionMask& mask() const { return mask_; }
    nn::NetParams<float>& params() { return params_; }
    const nn::NetParams<float>& params() const { return params_; }

    // Inference-mode forward (no dropout). Reentrant; safe to call from
    // multiple threads on one immutable model.
    nn::RowVec<float> forward_logits(const TokenWindow& window) const;
    ProbabilityVector forward(const TokenWindow& window) const;
    std::vector<ProbabilityVector> forward_batch(std::span<const TokenWindow> windows) const;

    // Swaps the attention pattern (mask rebuilt); parameters untouched.
    void set_pattern(const AttentionPattern& pattern);

    void zero_head();

private:
    ModelConfig cfg_;
    nn::NetParams<float> params_;
    AttentionMask mask_;
};

}  // namespace syswatch
