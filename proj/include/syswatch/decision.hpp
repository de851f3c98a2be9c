#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "syswatch/model.hpp"

namespace syswatch {

enum class Aggregation { Mean, MajorityVote, WeightedMean };

// Device-level verdict policy. The malicious score of a pooled distribution
// is 1 - P(Normal); a verdict is malicious when that score reaches the
// threshold, so lowering the threshold widens the flagged set.
struct DecisionPolicy {
    double threshold = 0.5;
    Aggregation aggregation = Aggregation::Mean;
    std::vector<double> weights;  // WeightedMean only; per-window, non-negative
    int window_span = 10;

    void validate() const;  // throws InvalidConfig
};

// Mean: elementwise average. WeightedMean: normalized weighted average
// (weights length must match the input count). MajorityVote: one-hot of the
// modal argmax class; ties break to the highest mean probability among the
// tied classes, then to the lowest class index.
ProbabilityVector pool(std::span<const ProbabilityVector> probs, Aggregation method,
                       std::span<const double> weights = {});

struct Verdict {
    BehaviorClass predicted = BehaviorClass::Normal;
    bool malicious = false;
    ProbabilityVector pooled{};
    int32_t first_window = 0;
    int32_t last_window = 0;  // inclusive
};

Verdict decide(const ProbabilityVector& pooled, const DecisionPolicy& policy,
               int32_t first_window = 0, int32_t last_window = 0);

// Slices a window stream into window_span groups and emits one verdict per
// group (the final group may be shorter).
std::vector<Verdict> run_policy(std::span<const ProbabilityVector> window_probs,
                                const DecisionPolicy& policy);

nlohmann::json to_json(const Verdict& verdict);

// Secondary model: multinomial logistic regression over the K probability
// features, fitted by full-batch gradient descent.
class Stacker {
public:
    struct FitOptions {
        double lr = 1.0;
        int max_iters = 10000;
        double rel_tolerance = 1e-6;
    };

    // Throws ClassMissing if any behavior class has no example. On hitting
    // the iteration cap the best parameters so far are kept and converged()
    // reports false.
    static Stacker fit(std::span<const ProbabilityVector> features,
                       std::span<const BehaviorClass> labels, const FitOptions& opt);
    static Stacker fit(std::span<const ProbabilityVector> features,
                       std::span<const BehaviorClass> labels) {
        return fit(features, labels, FitOptions());
    }

    BehaviorClass apply(const ProbabilityVector& probs) const;
    bool converged() const { return converged_; }
    int iterations() const { return iterations_; }

private:
    Stacker() = default;
    // weights_[k*(kNumClasses+1) + j]: class k, feature j (last = bias).
    std::vector<double> weights_;
    bool converged_ = false;
    int iterations_ = 0;
};

}  // namespace syswatch
