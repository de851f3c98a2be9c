#pragma once

// Brute-force recomputation oracles, kept independent of the library's
// implementation paths: metrics are rebuilt from expanded (truth, prediction)
// sample lists, and the correlation coefficient comes from literal indicator
// covariances rather than the closed marginal form.

#include <cmath>
#include <cstdint>
#include <vector>

struct OracleMetrics {
    double accuracy = 0;
    std::vector<double> per_precision, per_recall, per_f1;
    double macro_precision = 0, macro_recall = 0, macro_f1 = 0;
    double kappa = 0;
    double mcc = 0;
};

inline OracleMetrics oracle_metrics(const std::vector<std::vector<int64_t>>& cm) {
    const int k = static_cast<int>(cm.size());
    std::vector<int> truths, preds;
    for (int t = 0; t < k; ++t)
        for (int p = 0; p < k; ++p)
            for (int64_t c = 0; c < cm[static_cast<size_t>(t)][static_cast<size_t>(p)]; ++c) {
                truths.push_back(t);
                preds.push_back(p);
            }
    const auto n = static_cast<double>(truths.size());

    OracleMetrics m;
    double hits = 0;
    for (size_t s = 0; s < truths.size(); ++s) hits += truths[s] == preds[s] ? 1.0 : 0.0;
    m.accuracy = hits / n;

    auto safe_div = [](double num, double den) { return den == 0.0 ? 0.0 : num / den; };

    m.per_precision.resize(static_cast<size_t>(k));
    m.per_recall.resize(static_cast<size_t>(k));
    m.per_f1.resize(static_cast<size_t>(k));
    for (int c = 0; c < k; ++c) {
        double tp = 0, fp = 0, fn = 0;
        for (size_t s = 0; s < truths.size(); ++s) {
            if (preds[s] == c && truths[s] == c) tp += 1;
            if (preds[s] == c && truths[s] != c) fp += 1;
            if (preds[s] != c && truths[s] == c) fn += 1;
        }
        const double prec = safe_div(tp, tp + fp);
        const double rec = safe_div(tp, tp + fn);
        const double f1 = safe_div(2.0 * prec * rec, prec + rec);
        m.per_precision[static_cast<size_t>(c)] = prec;
        m.per_recall[static_cast<size_t>(c)] = rec;
        m.per_f1[static_cast<size_t>(c)] = f1;
        m.macro_precision += prec / k;
        m.macro_recall += rec / k;
        m.macro_f1 += f1 / k;
    }

    // Cohen's kappa from observed vs. chance agreement.
    double pe = 0;
    for (int c = 0; c < k; ++c) {
        double row = 0, col = 0;
        for (size_t s = 0; s < truths.size(); ++s) {
            row += truths[s] == c ? 1.0 : 0.0;
            col += preds[s] == c ? 1.0 : 0.0;
        }
        pe += (row / n) * (col / n);
    }
    m.kappa = safe_div(m.accuracy - pe, 1.0 - pe);

    // Correlation coefficient via indicator covariances.
    double cov_xy = 0, cov_xx = 0, cov_yy = 0;
    for (int c = 0; c < k; ++c) {
        double sxy = 0, sx = 0, sy = 0;
        for (size_t s = 0; s < truths.size(); ++s) {
            const double x = truths[s] == c ? 1.0 : 0.0;
            const double y = preds[s] == c ? 1.0 : 0.0;
            sxy += x * y;
            sx += x;
            sy += y;
        }
        cov_xy += sxy - sx * sy / n;
        cov_xx += sx - sx * sx / n;  // sum of x^2 equals sum of x for indicators
        cov_yy += sy - sy * sy / n;
    }
    m.mcc = safe_div(cov_xy, std::sqrt(cov_xx * cov_yy));
    return m;
}

// Binary-equation oracle, written straight from the four-count formulas.
struct OracleBinary {
    double accuracy, precision, recall, f1, kappa, mcc;
};

inline OracleBinary oracle_binary(double tp, double tn, double fp, double fn) {
    auto safe_div = [](double num, double den) { return den == 0.0 ? 0.0 : num / den; };
    OracleBinary b{};
    b.accuracy = safe_div(tp + tn, tp + tn + fp + fn);
    b.precision = safe_div(tp, tp + fp);
    b.recall = safe_div(tp, tp + fn);
    b.f1 = safe_div(2.0 * b.precision * b.recall, b.precision + b.recall);
    b.kappa = safe_div(2.0 * (tp * tn - fn * fp),
                       (tp + fp) * (fp + tn) + (tp + fn) * (fn + tn));
    b.mcc = safe_div(tp * tn - fp * fn,
                     std::sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)));
    return b;
}
