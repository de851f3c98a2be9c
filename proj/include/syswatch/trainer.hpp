#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "syswatch/metrics.hpp"
#include "syswatch/model.hpp"

namespace syswatch {

struct TrainConfig {
    int epochs = 5;
    double lr = 1e-3;  // from-scratch desk default; 1e-5 matches fine-tuning setups
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
    int batch_size = 16;
    uint64_t shuffle_seed = 1;
    double val_fraction = 0.2;

    void validate() const;  // throws InvalidConfig
};

struct EpochStats {
    double train_loss = 0;
    MetricsReport val_metrics;
    double seconds = 0;
};

struct TrainReport {
    std::vector<EpochStats> epochs;
};

nlohmann::json to_json(const TrainReport& report);

// -log(probs[label]) with a 1e-12 probability floor.
double cross_entropy(const ProbabilityVector& probs, BehaviorClass label);

// Decoupled-weight-decay Adam. Bias-corrected moments; the update is
// p <- p*(1 - lr*wd) - lr * m_hat / (sqrt(v_hat) + eps), so a zero gradient
// with weight decay is an exact multiplicative shrink. Templated so the unit
// checks can run the identical code path in double precision.
template <class S>
class AdamWOptimizer {
public:
    AdamWOptimizer(double lr, double beta1, double beta2, double eps, double weight_decay)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), wd_(weight_decay) {}

    explicit AdamWOptimizer(const TrainConfig& cfg)
        : AdamWOptimizer(cfg.lr, cfg.beta1, cfg.beta2, cfg.eps, cfg.weight_decay) {}

    // Throws NumericalFault on a non-finite gradient.
    void step(nn::NetParams<S>& params, const nn::NetParams<S>& grads);

    int64_t steps() const { return t_; }

private:
    double lr_, beta1_, beta2_, eps_, wd_;
    int64_t t_ = 0;
    std::vector<std::vector<S>> m_, v_;
};

// Supervised fine-tuning: stratified train/validation split, per-epoch
// deterministic shuffling, mini-batch AdamW on cross-entropy. Throws
// ClassMissing when a behavior class has no window in the training split.
TrainReport train(ClassifierModel& model, std::span<const TokenWindow> windows,
                  const TrainConfig& cfg);

struct GradCheckOptions {
    size_t min_coords = 200;
    double step = 1e-5;
    double tolerance = 1e-4;
    uint64_t seed = 42;
    // Test hook: scales the analytic gradient of one tensor so the check's
    // ability to catch a broken backward pass is itself verifiable.
    int perturb_tensor = -1;
    double perturb_factor = 1.0;
};

struct GradCheckResult {
    bool pass = false;
    double max_rel_error = 0;
    size_t coords_checked = 0;
};

// Central finite differences vs. analytic gradients of cross_entropy∘forward,
// in double precision, over a stratified random subsample of coordinates.
GradCheckResult grad_check(const ClassifierModel& model, const TokenWindow& window,
                           BehaviorClass label, const GradCheckOptions& opt = {});

}  // namespace syswatch
