#include "syswatch/model.hpp"

#include <cmath>

#include "syswatch/errors.hpp"

namespace syswatch {

void ModelConfig::validate() const {
    if (context < 2) throw InvalidConfig("context must be >= 2");
    if (vocab_size < 3) throw InvalidConfig("vocabulary must include the reserved tokens");
    if (embed_dim < 1) throw InvalidConfig("embed_dim must be positive");
    if (num_heads < 1) throw InvalidConfig("num_heads must be positive");
    if (embed_dim % num_heads != 0)
        throw InvalidConfig("embed_dim must be divisible by num_heads");
    if (num_layers < 1) throw InvalidConfig("num_layers must be positive");
    if (num_classes != kNumClasses)
        throw InvalidConfig("classifier is fixed at " + std::to_string(kNumClasses) +
                            " classes");
    if (ffn_dim < 0) throw InvalidConfig("ffn_dim must be >= 0");
    if (!(dropout >= 0.0f && dropout < 1.0f))
        throw InvalidConfig("dropout must be in [0,1)");
    validate_pattern(pattern, context);
}

ProbabilityVector softmax_probs(const nn::RowVec<float>& logits) {
    ProbabilityVector probs{};
    const int k = static_cast<int>(logits.size());
    double max_logit = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < k; ++i)
        max_logit = std::max(max_logit, static_cast<double>(logits(i)));
    double z = 0.0;
    for (int i = 0; i < k; ++i) {
        probs[static_cast<size_t>(i)] = std::exp(static_cast<double>(logits(i)) - max_logit);
        z += probs[static_cast<size_t>(i)];
    }
    for (auto& p : probs) p /= z;
    return probs;
}

ClassifierModel::ClassifierModel(const ModelConfig& cfg)
    : cfg_(cfg),
      params_((cfg.validate(), nn::init_params<float>(cfg, cfg.init_seed))),
      mask_(AttentionMask::build(cfg.pattern, cfg.context)) {}

ClassifierModel::ClassifierModel(const ModelConfig& cfg, nn::NetParams<float> params)
    : cfg_(cfg), params_(std::move(params)),
      mask_((cfg_.validate(), AttentionMask::build(cfg_.pattern, cfg_.context))) {
    if (params_.token_embed.rows() != cfg_.vocab_size ||
        params_.token_embed.cols() != cfg_.embed_dim ||
        params_.pos_embed.rows() != cfg_.context ||
        params_.layers.size() != static_cast<size_t>(cfg_.num_layers) ||
        params_.head_w.cols() != cfg_.num_classes)
        throw InvalidConfig("parameter shapes do not match the model config");
}

namespace {

nn::ForwardCache<float>& inference_workspace() {
    thread_local nn::ForwardCache<float> ws;
    return ws;
}

}  // namespace

nn::RowVec<float> ClassifierModel::forward_logits(const TokenWindow& window) const {
    return nn::forward_logits<float>(params_, cfg_, mask_, window.ids, window.valid_len,
                                     nullptr, inference_workspace());
}

ProbabilityVector ClassifierModel::forward(const TokenWindow& window) const {
    return softmax_probs(forward_logits(window));
}

std::vector<ProbabilityVector> ClassifierModel::forward_batch(
    std::span<const TokenWindow> windows) const {
    std::vector<ProbabilityVector> out(windows.size());
#pragma omp parallel for schedule(dynamic)
    for (int64_t i = 0; i < static_cast<int64_t>(windows.size()); ++i)
        out[static_cast<size_t>(i)] = forward(windows[static_cast<size_t>(i)]);
    return out;
}

void ClassifierModel::set_pattern(const AttentionPattern& pattern) {
    validate_pattern(pattern, cfg_.context);
    cfg_.pattern = pattern;
    mask_ = AttentionMask::build(pattern, cfg_.context);
}

void ClassifierModel::zero_head() {
    params_.head_w.setZero();
    params_.head_b.setZero();
}

}  // namespace syswatch
