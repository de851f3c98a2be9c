#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace syswatch {

// K x K counts; entry (t, p) = samples of true class t predicted as p.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(int k);

    int k() const { return k_; }
    int64_t& at(int t, int p);
    int64_t at(int t, int p) const;
    int64_t total() const;
    int64_t diagonal_sum() const;
    std::vector<int64_t> row_sums() const;  // true-class marginals
    std::vector<int64_t> col_sums() const;  // predicted-class marginals
    ConfusionMatrix transposed() const;

private:
    int k_;
    std::vector<int64_t> counts_;
};

ConfusionMatrix confusion(std::span<const int> truths, std::span<const int> preds, int k);

struct BinaryCounts {
    int64_t tp = 0;
    int64_t tn = 0;
    int64_t fp = 0;
    int64_t fn = 0;
};

// The six confusion-matrix metrics. A metric whose denominator vanishes is
// reported as 0 and listed in `degenerate` instead of raising.
struct BinaryMetrics {
    double accuracy = 0;
    double precision = 0;
    double recall = 0;
    double f1 = 0;
    double kappa = 0;
    double mcc = 0;
    std::vector<std::string> degenerate;
};

BinaryMetrics binary_metrics(const BinaryCounts& c);

struct MetricsReport {
    double accuracy = 0;
    std::vector<double> per_class_precision;
    std::vector<double> per_class_recall;
    std::vector<double> per_class_f1;
    double macro_precision = 0;
    double macro_recall = 0;
    double macro_f1 = 0;
    double kappa = 0;
    double mcc = 0;
    std::vector<std::vector<double>> tpr_rows;  // row-normalized confusion; zero rows stay zero
    std::vector<std::vector<int64_t>> confusion;
    std::vector<std::string> degenerate;
};

// Accuracy = trace/total; per-class one-vs-rest precision/recall/F1 with
// unweighted macro averages; marginal-based Cohen's kappa and the K-class
// correlation coefficient, both of which reduce to the binary formulas at
// K = 2. Throws EmptyMatrix when total = 0.
MetricsReport multiclass_metrics(const ConfusionMatrix& cm);

// Row-normalized confusion matrix; throws EmptyRow if any row has no samples.
std::vector<std::vector<double>> tpr_rows(const ConfusionMatrix& cm);

nlohmann::json to_json(const MetricsReport& report);

// Text rendering of the row-normalized confusion matrix for terminal output.
std::string render_confusion(const ConfusionMatrix& cm,
                             std::span<const std::string_view> class_names);

}  // namespace syswatch
