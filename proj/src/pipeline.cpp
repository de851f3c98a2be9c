#include "syswatch/pipeline.hpp"

#include <algorithm>

#include "syswatch/errors.hpp"

namespace syswatch {

namespace {

void append_windows(std::vector<TokenWindow>& out, const SyscallSequence& seq,
                    const Vocabulary& vocab, const WindowingConfig& cfg) {
    const auto ids = encode(seq, vocab);
    auto windows =
        make_windows(ids, cfg.context, cfg.effective_stride(), seq.label, seq.source);
    out.insert(out.end(), std::make_move_iterator(windows.begin()),
               std::make_move_iterator(windows.end()));
}

}  // namespace

DatasetWindows load_dataset_windows(const std::filesystem::path& root,
                                    const WindowingConfig& cfg) {
    const auto manifest = scan_dataset(root);

    // Pass 1: vocabulary in manifest order.
    DatasetWindows out;
    bool any = false;
    for (const auto& entry : manifest) {
        const auto seq = load_trace_file(entry.path, entry.label, cfg.filter, cfg.policy);
        for (const auto& name : seq.syscalls) {
            out.vocab.add(name);
            any = true;
        }
    }
    if (!any) throw EmptyCorpus("dataset contributed no syscalls: " + root.string());

    // Pass 2: encode and window per file.
    for (const auto& entry : manifest) {
        ParseStats stats;
        const auto seq =
            load_trace_file(entry.path, entry.label, cfg.filter, cfg.policy, &stats);
        out.stats.lines += stats.lines;
        out.stats.parsed += stats.parsed;
        out.stats.malformed += stats.malformed;
        out.stats.blank += stats.blank;
        out.stats.filtered += stats.filtered;
        append_windows(out.windows, seq, out.vocab, cfg);
    }
    out.file_count = manifest.size();
    return out;
}

std::vector<TokenWindow> load_dataset_windows_with_vocab(const std::filesystem::path& root,
                                                         const Vocabulary& vocab,
                                                         const WindowingConfig& cfg) {
    const auto manifest = scan_dataset(root);
    std::vector<TokenWindow> windows;
    for (const auto& entry : manifest) {
        const auto seq = load_trace_file(entry.path, entry.label, cfg.filter, cfg.policy);
        append_windows(windows, seq, vocab, cfg);
    }
    return windows;
}

std::vector<TokenWindow> windows_from_file(const std::filesystem::path& path,
                                           std::optional<BehaviorClass> label,
                                           const Vocabulary& vocab,
                                           const WindowingConfig& cfg) {
    const auto seq = load_trace_file(path, label, cfg.filter, cfg.policy);
    std::vector<TokenWindow> windows;
    append_windows(windows, seq, vocab, cfg);
    return windows;
}

std::vector<Prediction> predict(const ClassifierModel& model,
                                std::span<const TokenWindow> windows) {
    const auto probs = model.forward_batch(windows);
    std::vector<Prediction> out(windows.size());
    for (size_t i = 0; i < windows.size(); ++i) {
        out[i].probs = probs[i];
        out[i].predicted = static_cast<int>(
            std::max_element(probs[i].begin(), probs[i].end()) - probs[i].begin());
        out[i].truth = windows[i].label;
        out[i].source = windows[i].source;
        out[i].window_index = windows[i].window_index;
    }
    return out;
}

MetricsReport evaluate(std::span<const Prediction> predictions) {
    std::vector<int> truths, preds;
    truths.reserve(predictions.size());
    preds.reserve(predictions.size());
    for (const auto& p : predictions) {
        if (!p.truth) continue;
        truths.push_back(static_cast<int>(*p.truth));
        preds.push_back(p.predicted);
    }
    if (truths.empty()) throw EmptyMatrix("no labeled predictions to evaluate");
    return multiclass_metrics(confusion(truths, preds, kNumClasses));
}

}  // namespace syswatch
