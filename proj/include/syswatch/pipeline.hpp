#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "syswatch/metrics.hpp"
#include "syswatch/model.hpp"
#include "syswatch/tokenizer.hpp"
#include "syswatch/trace.hpp"

namespace syswatch {

struct WindowingConfig {
    int32_t context = 512;
    int32_t stride = 0;  // 0 -> context - 1 (non-overlapping payload)
    std::set<std::string> filter = default_filter_set();
    LineErrorPolicy policy = LineErrorPolicy::Skip;

    int32_t effective_stride() const { return stride > 0 ? stride : context - 1; }
};

struct DatasetWindows {
    Vocabulary vocab;
    std::vector<TokenWindow> windows;
    size_t file_count = 0;
    ParseStats stats;
};

// Two-pass load: first pass builds the vocabulary in manifest order, second
// pass encodes and windows each file. Memory stays per-file.
DatasetWindows load_dataset_windows(const std::filesystem::path& root,
                                    const WindowingConfig& cfg);

// Same windowing against a fixed vocabulary (evaluation on held-out data).
std::vector<TokenWindow> load_dataset_windows_with_vocab(const std::filesystem::path& root,
                                                         const Vocabulary& vocab,
                                                         const WindowingConfig& cfg);

std::vector<TokenWindow> windows_from_file(const std::filesystem::path& path,
                                           std::optional<BehaviorClass> label,
                                           const Vocabulary& vocab, const WindowingConfig& cfg);

struct Prediction {
    ProbabilityVector probs{};
    int predicted = 0;
    std::optional<BehaviorClass> truth;
    std::string source;
    int32_t window_index = 0;
};

std::vector<Prediction> predict(const ClassifierModel& model,
                                std::span<const TokenWindow> windows);

// Multiclass metrics over labeled predictions.
MetricsReport evaluate(std::span<const Prediction> predictions);

}  // namespace syswatch
