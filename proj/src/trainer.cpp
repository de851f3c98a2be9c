#include "syswatch/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "syswatch/errors.hpp"
#include "syswatch/pipeline.hpp"

namespace syswatch {

void TrainConfig::validate() const {
    if (epochs < 1) throw InvalidConfig("epochs must be >= 1");
    // lr = 0 is the legal null update (leaves parameters untouched).
    if (!(lr >= 0.0)) throw InvalidConfig("learning rate must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw InvalidConfig("beta1 must be in [0,1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw InvalidConfig("beta2 must be in [0,1)");
    if (!(eps > 0.0)) throw InvalidConfig("eps must be positive");
    if (!(weight_decay >= 0.0)) throw InvalidConfig("weight decay must be >= 0");
    if (batch_size < 1) throw InvalidConfig("batch size must be >= 1");
    if (!(val_fraction > 0.0 && val_fraction < 1.0))
        throw InvalidConfig("validation fraction must be in (0,1)");
}

double cross_entropy(const ProbabilityVector& probs, BehaviorClass label) {
    const double p = probs[static_cast<size_t>(label)];
    return -std::log(std::max(p, 1e-12));
}

template <class S>
void AdamWOptimizer<S>::step(nn::NetParams<S>& params, const nn::NetParams<S>& grads) {
    auto pts = params.tensors();
    auto gts = grads.tensors();
    if (m_.empty()) {
        m_.resize(pts.size());
        v_.resize(pts.size());
        for (size_t i = 0; i < pts.size(); ++i) {
            m_[i].assign(static_cast<size_t>(pts[i].size), S(0));
            v_[i].assign(static_cast<size_t>(pts[i].size), S(0));
        }
    }
    ++t_;
    const S b1 = static_cast<S>(beta1_);
    const S b2 = static_cast<S>(beta2_);
    const S lr = static_cast<S>(lr_);
    const S eps = static_cast<S>(eps_);
    const S bc1 = static_cast<S>(1.0 - std::pow(beta1_, static_cast<double>(t_)));
    const S bc2 = static_cast<S>(1.0 - std::pow(beta2_, static_cast<double>(t_)));
    const S decay = static_cast<S>(1.0 - lr_ * wd_);

    for (size_t i = 0; i < pts.size(); ++i) {
        S* p = pts[i].data;
        const S* g = gts[i].data;
        S* m = m_[i].data();
        S* v = v_[i].data();
        const auto size = pts[i].size;
        for (Eigen::Index j = 0; j < size; ++j) {
            const S gj = g[j];
            if (!std::isfinite(gj))
                throw NumericalFault("non-finite gradient in " + pts[i].name);
            m[j] = b1 * m[j] + (S(1) - b1) * gj;
            v[j] = b2 * v[j] + (S(1) - b2) * gj * gj;
            const S m_hat = m[j] / bc1;
            const S v_hat = v[j] / bc2;
            p[j] = p[j] * decay - lr * (m_hat / (std::sqrt(v_hat) + eps));
        }
    }
}

template class AdamWOptimizer<float>;
template class AdamWOptimizer<double>;

nlohmann::json to_json(const TrainReport& report) {
    nlohmann::json epochs = nlohmann::json::array();
    for (size_t i = 0; i < report.epochs.size(); ++i) {
        const auto& e = report.epochs[i];
        epochs.push_back({{"epoch", i + 1},
                          {"train_loss", e.train_loss},
                          {"val_metrics", to_json(e.val_metrics)},
                          {"seconds", e.seconds}});
    }
    return nlohmann::json{{"epochs", epochs}};
}

namespace {

constexpr uint64_t kSplitSalt = 0x5b17a8f0c3d2e491ULL;
constexpr uint64_t kShuffleSalt = 0x9c4e1d2b7a6f3508ULL;
constexpr uint64_t kDropoutSalt = 0x3f8a65e9d10c72b4ULL;

MetricsReport metrics_over(const ClassifierModel& model,
                           std::span<const TokenWindow> windows) {
    const auto probs = model.forward_batch(windows);
    std::vector<int> truths(windows.size()), preds(windows.size());
    for (size_t i = 0; i < windows.size(); ++i) {
        truths[i] = static_cast<int>(*windows[i].label);
        preds[i] = static_cast<int>(
            std::max_element(probs[i].begin(), probs[i].end()) - probs[i].begin());
    }
    return multiclass_metrics(confusion(truths, preds, kNumClasses));
}

}  // namespace

TrainReport train(ClassifierModel& model, std::span<const TokenWindow> windows,
                  const TrainConfig& cfg) {
    cfg.validate();
    for (const auto& w : windows)
        if (!w.label) throw InvalidConfig("training window without label");

    // Stratified split, seeded.
    std::array<std::vector<size_t>, kNumClasses> by_class;
    for (size_t i = 0; i < windows.size(); ++i)
        by_class[static_cast<size_t>(*windows[i].label)].push_back(i);

    Rng split_rng(Rng::mix(cfg.shuffle_seed, kSplitSalt));
    std::vector<size_t> train_idx, val_idx;
    for (size_t c = 0; c < kNumClasses; ++c) {
        auto& members = by_class[c];
        split_rng.shuffle(members);
        const auto n_val = static_cast<size_t>(
            std::floor(cfg.val_fraction * static_cast<double>(members.size())));
        val_idx.insert(val_idx.end(), members.begin(), members.begin() + n_val);
        train_idx.insert(train_idx.end(), members.begin() + n_val, members.end());
        if (members.size() == n_val)
            throw ClassMissing(std::string(to_string(static_cast<BehaviorClass>(c))) +
                               " has no window in the training split");
    }

    AdamWOptimizer<float> opt(cfg);
    const auto& mcfg = model.config();
    const auto slots = static_cast<size_t>(cfg.batch_size);
    std::vector<nn::NetParams<float>> slot_grads;
    slot_grads.reserve(slots);
    for (size_t s = 0; s < slots; ++s) slot_grads.push_back(nn::NetParams<float>::sized(mcfg));
    nn::NetParams<float> batch_grads = nn::NetParams<float>::sized(mcfg);
    std::vector<double> slot_loss(slots, 0.0);

    Rng shuffle_rng(Rng::mix(cfg.shuffle_seed, kShuffleSalt));
    TrainReport report;
    int64_t global_step = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        shuffle_rng.shuffle(train_idx);

        double loss_sum = 0.0;
        size_t loss_count = 0;
        for (size_t start = 0; start < train_idx.size(); start += slots) {
            const auto bn =
                static_cast<int64_t>(std::min(slots, train_idx.size() - start));
            const int64_t step_id = global_step++;

#pragma omp parallel for schedule(static)
            for (int64_t slot = 0; slot < bn; ++slot) {
                thread_local nn::ForwardCache<float> cache;
                const auto& w = windows[train_idx[start + static_cast<size_t>(slot)]];
                Rng drop_rng(Rng::mix(Rng::mix(cfg.shuffle_seed ^ kDropoutSalt,
                                               static_cast<uint64_t>(step_id)),
                                      static_cast<uint64_t>(slot)));
                Rng* drop = mcfg.dropout > 0.0f ? &drop_rng : nullptr;
                const auto logits = nn::forward_logits<float>(
                    model.params(), mcfg, model.mask(), w.ids, w.valid_len, drop, cache);
                const auto probs = softmax_probs(logits);
                slot_loss[static_cast<size_t>(slot)] = cross_entropy(probs, *w.label);

                nn::RowVec<float> dlogits(mcfg.num_classes);
                for (int kcls = 0; kcls < mcfg.num_classes; ++kcls)
                    dlogits(kcls) = static_cast<float>(probs[static_cast<size_t>(kcls)]) -
                                    (kcls == static_cast<int>(*w.label) ? 1.0f : 0.0f);
                auto& grads = slot_grads[static_cast<size_t>(slot)];
                grads.set_zero();
                nn::backward<float>(model.params(), mcfg, model.mask(), cache, dlogits, grads);
            }

            batch_grads.set_zero();
            for (int64_t slot = 0; slot < bn; ++slot) {
                const double loss = slot_loss[static_cast<size_t>(slot)];
                if (!std::isfinite(loss)) throw NumericalFault("non-finite training loss");
                loss_sum += loss;
                batch_grads.accumulate(slot_grads[static_cast<size_t>(slot)]);
            }
            loss_count += static_cast<size_t>(bn);
            batch_grads.scale(1.0f / static_cast<float>(bn));
            opt.step(model.params(), batch_grads);
        }

        EpochStats stats;
        stats.train_loss = loss_sum / static_cast<double>(loss_count);
        // Tiny datasets can end up with an empty validation side; report on
        // the training windows in that case rather than failing.
        std::vector<TokenWindow> val_windows;
        const auto& eval_idx = val_idx.empty() ? train_idx : val_idx;
        val_windows.reserve(eval_idx.size());
        for (const auto i : eval_idx) val_windows.push_back(windows[i]);
        stats.val_metrics = metrics_over(model, val_windows);
        stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                            .count();
        report.epochs.push_back(std::move(stats));
    }
    return report;
}

GradCheckResult grad_check(const ClassifierModel& model, const TokenWindow& window,
                           BehaviorClass label, const GradCheckOptions& opt) {
    const ModelConfig& cfg = model.config();
    auto params = model.params().cast<double>();
    const AttentionMask& mask = model.mask();

    nn::ForwardCache<double> fd_cache;
    auto loss_at = [&]() {
        const auto logits = nn::forward_logits<double>(params, cfg, mask, window.ids,
                                                       window.valid_len, nullptr, fd_cache);
        double max_logit = logits.maxCoeff();
        double z = 0.0;
        for (int i = 0; i < cfg.num_classes; ++i) z += std::exp(logits(i) - max_logit);
        const double p =
            std::exp(logits(static_cast<int>(label)) - max_logit) / z;
        return -std::log(std::max(p, 1e-12));
    };

    // Analytic gradients.
    nn::ForwardCache<double> cache;
    const auto logits = nn::forward_logits<double>(params, cfg, mask, window.ids,
                                                   window.valid_len, nullptr, cache);
    double max_logit = logits.maxCoeff();
    double z = 0.0;
    for (int i = 0; i < cfg.num_classes; ++i) z += std::exp(logits(i) - max_logit);
    nn::RowVec<double> dlogits(cfg.num_classes);
    for (int i = 0; i < cfg.num_classes; ++i) {
        const double p = std::exp(logits(i) - max_logit) / z;
        dlogits(i) = p - (i == static_cast<int>(label) ? 1.0 : 0.0);
    }
    auto grads = nn::NetParams<double>::sized(cfg);
    nn::backward<double>(params, cfg, mask, cache, dlogits, grads);

    auto grad_views = grads.tensors();
    if (opt.perturb_tensor >= 0 &&
        opt.perturb_tensor < static_cast<int>(grad_views.size())) {
        auto& t = grad_views[static_cast<size_t>(opt.perturb_tensor)];
        for (Eigen::Index j = 0; j < t.size; ++j)
            t.data[j] *= opt.perturb_factor;
    }

    auto param_views = params.tensors();
    Eigen::Index total = 0;
    for (const auto& t : param_views) total += t.size;

    Rng rng(opt.seed);
    GradCheckResult result;
    const double h = opt.step;
    // Central differences on a loss of order one resolve gradients down to
    // roughly 1e-11; below this floor a relative comparison at 1e-4 would be
    // measuring finite-difference noise, so such coordinates only need to
    // agree absolutely.
    constexpr double kTinyFloor = 1e-6;

    for (size_t ti = 0; ti < param_views.size(); ++ti) {
        auto& pt = param_views[ti];
        const auto share = static_cast<size_t>(
            std::ceil(static_cast<double>(opt.min_coords) * static_cast<double>(pt.size) /
                      static_cast<double>(total)));
        const auto draws = std::min<size_t>(std::max<size_t>(3, share),
                                            static_cast<size_t>(pt.size));
        Eigen::Index max_idx = 0;
        for (Eigen::Index j = 1; j < pt.size; ++j)
            if (std::abs(grad_views[ti].data[j]) > std::abs(grad_views[ti].data[max_idx]))
                max_idx = j;
        for (size_t d = 0; d < draws; ++d) {
            // Always probe the strongest coordinate of each tensor; the rest
            // of the sample is random.
            const auto idx = d == 0 ? max_idx
                                    : static_cast<Eigen::Index>(rng.uniform_index(
                                          static_cast<uint64_t>(pt.size)));
            const double analytic = grad_views[ti].data[idx];
            const double original = pt.data[idx];
            pt.data[idx] = original + h;
            const double loss_hi = loss_at();
            pt.data[idx] = original - h;
            const double loss_lo = loss_at();
            pt.data[idx] = original;
            const double numeric = (loss_hi - loss_lo) / (2.0 * h);

            const double denom = std::max(std::abs(analytic), std::abs(numeric));
            double rel;
            if (denom < kTinyFloor)
                rel = std::abs(analytic - numeric) < kTinyFloor
                          ? 0.0
                          : std::abs(analytic - numeric) / kTinyFloor;
            else
                rel = std::abs(analytic - numeric) / denom;
            result.max_rel_error = std::max(result.max_rel_error, rel);
            ++result.coords_checked;
        }
    }
    result.pass = result.max_rel_error < opt.tolerance;
    return result;
}

}  // namespace syswatch
