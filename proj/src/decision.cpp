#include "syswatch/decision.hpp"

#include <algorithm>
#include <cmath>

#include "syswatch/errors.hpp"

namespace syswatch {

void DecisionPolicy::validate() const {
    if (!(threshold >= 0.0 && threshold <= 1.0))
        throw InvalidConfig("threshold must be in [0,1]");
    if (window_span < 1) throw InvalidConfig("window_span must be >= 1");
    if (aggregation == Aggregation::WeightedMean) {
        if (weights.empty()) throw InvalidConfig("weighted mean requires weights");
        double sum = 0.0;
        for (const auto w : weights) {
            if (w < 0.0) throw InvalidConfig("weights must be non-negative");
            sum += w;
        }
        if (sum == 0.0) throw InvalidConfig("weights must not all be zero");
    }
}

ProbabilityVector pool(std::span<const ProbabilityVector> probs, Aggregation method,
                       std::span<const double> weights) {
    if (probs.empty()) throw EmptyInput("cannot pool an empty window list");

    ProbabilityVector out{};
    switch (method) {
        case Aggregation::Mean: {
            for (const auto& p : probs)
                for (size_t k = 0; k < out.size(); ++k) out[k] += p[k];
            for (auto& v : out) v /= static_cast<double>(probs.size());
            return out;
        }
        case Aggregation::WeightedMean: {
            if (weights.size() != probs.size())
                throw WeightMismatch("got " + std::to_string(weights.size()) +
                                     " weights for " + std::to_string(probs.size()) +
                                     " windows");
            double total = 0.0;
            for (const auto w : weights) {
                if (w < 0.0) throw WeightMismatch("weights must be non-negative");
                total += w;
            }
            if (total == 0.0) throw WeightMismatch("weights must not all be zero");
            for (size_t i = 0; i < probs.size(); ++i)
                for (size_t k = 0; k < out.size(); ++k) out[k] += weights[i] * probs[i][k];
            for (auto& v : out) v /= total;
            return out;
        }
        case Aggregation::MajorityVote: {
            std::array<int, kNumClasses> votes{};
            ProbabilityVector mean{};
            for (const auto& p : probs) {
                const auto arg = std::max_element(p.begin(), p.end()) - p.begin();
                ++votes[static_cast<size_t>(arg)];
                for (size_t k = 0; k < mean.size(); ++k) mean[k] += p[k];
            }
            for (auto& v : mean) v /= static_cast<double>(probs.size());

            const int top = *std::max_element(votes.begin(), votes.end());
            // Ties break to the highest mean probability, then lowest index.
            size_t winner = kNumClasses;
            for (size_t k = 0; k < votes.size(); ++k) {
                if (votes[k] != top) continue;
                if (winner == kNumClasses || mean[k] > mean[winner]) winner = k;
            }
            out[winner] = 1.0;
            return out;
        }
    }
    throw InvalidConfig("unknown aggregation method");
}

Verdict decide(const ProbabilityVector& pooled, const DecisionPolicy& policy,
               int32_t first_window, int32_t last_window) {
    Verdict v;
    v.pooled = pooled;
    v.first_window = first_window;
    v.last_window = last_window;
    v.predicted = static_cast<BehaviorClass>(
        std::max_element(pooled.begin(), pooled.end()) - pooled.begin());
    const double malicious_score = 1.0 - pooled[static_cast<size_t>(BehaviorClass::Normal)];
    v.malicious = malicious_score >= policy.threshold;
    return v;
}

std::vector<Verdict> run_policy(std::span<const ProbabilityVector> window_probs,
                                const DecisionPolicy& policy) {
    policy.validate();
    std::vector<Verdict> verdicts;
    const auto span = static_cast<size_t>(policy.window_span);
    for (size_t start = 0; start < window_probs.size(); start += span) {
        const auto count = std::min(span, window_probs.size() - start);
        const auto group = window_probs.subspan(start, count);
        std::span<const double> weights;
        if (policy.aggregation == Aggregation::WeightedMean)
            weights = std::span<const double>(policy.weights.data(),
                                              std::min(policy.weights.size(), count));
        const auto pooled = pool(group, policy.aggregation, weights);
        verdicts.push_back(decide(pooled, policy, static_cast<int32_t>(start),
                                  static_cast<int32_t>(start + count - 1)));
    }
    return verdicts;
}

nlohmann::json to_json(const Verdict& v) {
    return nlohmann::json{
        {"window_range", {v.first_window, v.last_window}},
        {"class", std::string(to_string(v.predicted))},
        {"malicious", v.malicious},
        {"probabilities", v.pooled},
    };
}

namespace {

constexpr size_t kFeatures = kNumClasses + 1;  // probabilities + bias

std::array<double, kNumClasses> stacker_logits(const std::vector<double>& weights,
                                               const ProbabilityVector& x) {
    std::array<double, kNumClasses> logits{};
    for (size_t k = 0; k < kNumClasses; ++k) {
        double z = weights[k * kFeatures + kNumClasses];  // bias
        for (size_t j = 0; j < kNumClasses; ++j) z += weights[k * kFeatures + j] * x[j];
        logits[k] = z;
    }
    return logits;
}

std::array<double, kNumClasses> softmax(const std::array<double, kNumClasses>& logits) {
    std::array<double, kNumClasses> p{};
    const double m = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (size_t k = 0; k < kNumClasses; ++k) {
        p[k] = std::exp(logits[k] - m);
        z += p[k];
    }
    for (auto& v : p) v /= z;
    return p;
}

}  // namespace

Stacker Stacker::fit(std::span<const ProbabilityVector> features,
                     std::span<const BehaviorClass> labels, const FitOptions& opt) {
    if (features.size() != labels.size())
        throw LengthMismatch("feature/label sizes differ");
    if (features.empty()) throw EmptyInput("stacker needs training examples");

    std::array<size_t, kNumClasses> counts{};
    for (const auto l : labels) ++counts[static_cast<size_t>(l)];
    for (size_t c = 0; c < kNumClasses; ++c)
        if (counts[c] == 0)
            throw ClassMissing(std::string(to_string(static_cast<BehaviorClass>(c))) +
                               " has no stacker training example");

    const auto n = static_cast<double>(features.size());
    Stacker model;
    model.weights_.assign(kNumClasses * kFeatures, 0.0);
    std::vector<double> grad(kNumClasses * kFeatures, 0.0);
    std::vector<double> best = model.weights_;
    double best_loss = std::numeric_limits<double>::infinity();
    double prev_loss = std::numeric_limits<double>::infinity();

    for (int iter = 0; iter < opt.max_iters; ++iter) {
        std::fill(grad.begin(), grad.end(), 0.0);
        double loss = 0.0;
        for (size_t i = 0; i < features.size(); ++i) {
            const auto p = softmax(stacker_logits(model.weights_, features[i]));
            const auto y = static_cast<size_t>(labels[i]);
            loss += -std::log(std::max(p[y], 1e-12));
            for (size_t k = 0; k < kNumClasses; ++k) {
                const double delta = p[k] - (k == y ? 1.0 : 0.0);
                for (size_t j = 0; j < kNumClasses; ++j)
                    grad[k * kFeatures + j] += delta * features[i][j];
                grad[k * kFeatures + kNumClasses] += delta;
            }
        }
        loss /= n;
        if (loss < best_loss) {
            best_loss = loss;
            best = model.weights_;
        }
        model.iterations_ = iter + 1;
        if (std::isfinite(prev_loss) &&
            std::abs(prev_loss - loss) / std::max(prev_loss, 1e-12) < opt.rel_tolerance) {
            model.converged_ = true;
            return model;
        }
        prev_loss = loss;
        for (size_t w = 0; w < model.weights_.size(); ++w)
            model.weights_[w] -= opt.lr * grad[w] / n;
    }
    // Iteration cap: keep the best parameters seen, flag non-convergence.
    model.weights_ = std::move(best);
    model.converged_ = false;
    return model;
}

BehaviorClass Stacker::apply(const ProbabilityVector& probs) const {
    const auto logits = stacker_logits(weights_, probs);
    return static_cast<BehaviorClass>(
        std::max_element(logits.begin(), logits.end()) - logits.begin());
}

}  // namespace syswatch
