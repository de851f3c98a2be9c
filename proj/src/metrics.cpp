#include "syswatch/metrics.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "syswatch/errors.hpp"

namespace syswatch {

ConfusionMatrix::ConfusionMatrix(int k) : k_(k) {
    if (k < 1) throw InvalidConfig("confusion matrix needs k >= 1");
    counts_.assign(static_cast<size_t>(k) * static_cast<size_t>(k), 0);
}

int64_t& ConfusionMatrix::at(int t, int p) {
    if (t < 0 || t >= k_ || p < 0 || p >= k_)
        throw LabelOutOfRange("confusion index out of range");
    return counts_[static_cast<size_t>(t) * static_cast<size_t>(k_) + static_cast<size_t>(p)];
}

int64_t ConfusionMatrix::at(int t, int p) const {
    return const_cast<ConfusionMatrix*>(this)->at(t, p);
}

int64_t ConfusionMatrix::total() const {
    int64_t sum = 0;
    for (const auto c : counts_) sum += c;
    return sum;
}

int64_t ConfusionMatrix::diagonal_sum() const {
    int64_t sum = 0;
    for (int i = 0; i < k_; ++i) sum += at(i, i);
    return sum;
}

std::vector<int64_t> ConfusionMatrix::row_sums() const {
    std::vector<int64_t> sums(static_cast<size_t>(k_), 0);
    for (int t = 0; t < k_; ++t)
        for (int p = 0; p < k_; ++p) sums[static_cast<size_t>(t)] += at(t, p);
    return sums;
}

std::vector<int64_t> ConfusionMatrix::col_sums() const {
    std::vector<int64_t> sums(static_cast<size_t>(k_), 0);
    for (int t = 0; t < k_; ++t)
        for (int p = 0; p < k_; ++p) sums[static_cast<size_t>(p)] += at(t, p);
    return sums;
}

ConfusionMatrix ConfusionMatrix::transposed() const {
    ConfusionMatrix out(k_);
    for (int t = 0; t < k_; ++t)
        for (int p = 0; p < k_; ++p) out.at(p, t) = at(t, p);
    return out;
}

ConfusionMatrix confusion(std::span<const int> truths, std::span<const int> preds, int k) {
    if (truths.size() != preds.size())
        throw LengthMismatch("truth/prediction lengths differ: " +
                             std::to_string(truths.size()) + " vs " +
                             std::to_string(preds.size()));
    ConfusionMatrix cm(k);
    for (size_t i = 0; i < truths.size(); ++i) {
        if (truths[i] < 0 || truths[i] >= k || preds[i] < 0 || preds[i] >= k)
            throw LabelOutOfRange("label outside [0," + std::to_string(k) + ") at index " +
                                  std::to_string(i));
        ++cm.at(truths[i], preds[i]);
    }
    return cm;
}

namespace {

// 0-with-flag policy for vanished denominators.
double guarded_ratio(double num, double den, const char* name,
                     std::vector<std::string>& degenerate) {
    if (den == 0.0) {
        degenerate.emplace_back(name);
        return 0.0;
    }
    return num / den;
}

}  // namespace

BinaryMetrics binary_metrics(const BinaryCounts& c) {
    const double tp = static_cast<double>(c.tp);
    const double tn = static_cast<double>(c.tn);
    const double fp = static_cast<double>(c.fp);
    const double fn = static_cast<double>(c.fn);
    const double total = tp + tn + fp + fn;
    if (c.tp < 0 || c.tn < 0 || c.fp < 0 || c.fn < 0)
        throw EmptyCounts("negative count");
    if (total < 1.0) throw EmptyCounts("empty binary counts");

    BinaryMetrics m;
    m.accuracy = (tp + tn) / total;
    m.precision = guarded_ratio(tp, tp + fp, "precision", m.degenerate);
    m.recall = guarded_ratio(tp, tp + fn, "recall", m.degenerate);
    m.f1 = guarded_ratio(2.0 * m.precision * m.recall, m.precision + m.recall, "f1",
                         m.degenerate);
    m.kappa = guarded_ratio(2.0 * (tp * tn - fn * fp),
                            (tp + fp) * (fp + tn) + (tp + fn) * (fn + tn), "kappa",
                            m.degenerate);
    m.mcc = guarded_ratio(tp * tn - fp * fn,
                          std::sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)), "mcc",
                          m.degenerate);
    return m;
}

MetricsReport multiclass_metrics(const ConfusionMatrix& cm) {
    const int k = cm.k();
    const int64_t total = cm.total();
    if (total < 1) throw EmptyMatrix("confusion matrix has no samples");

    MetricsReport r;
    const auto rows = cm.row_sums();
    const auto cols = cm.col_sums();
    const double n = static_cast<double>(total);

    r.accuracy = static_cast<double>(cm.diagonal_sum()) / n;

    r.per_class_precision.resize(static_cast<size_t>(k));
    r.per_class_recall.resize(static_cast<size_t>(k));
    r.per_class_f1.resize(static_cast<size_t>(k));
    for (int c = 0; c < k; ++c) {
        const double tp = static_cast<double>(cm.at(c, c));
        const double fp = static_cast<double>(cols[static_cast<size_t>(c)]) - tp;
        const double fn = static_cast<double>(rows[static_cast<size_t>(c)]) - tp;
        const std::string tag = "[" + std::to_string(c) + "]";
        const double prec = guarded_ratio(tp, tp + fp, ("precision" + tag).c_str(),
                                          r.degenerate);
        const double rec = guarded_ratio(tp, tp + fn, ("recall" + tag).c_str(), r.degenerate);
        const double f1 = guarded_ratio(2.0 * prec * rec, prec + rec, ("f1" + tag).c_str(),
                                        r.degenerate);
        r.per_class_precision[static_cast<size_t>(c)] = prec;
        r.per_class_recall[static_cast<size_t>(c)] = rec;
        r.per_class_f1[static_cast<size_t>(c)] = f1;
        r.macro_precision += prec / k;
        r.macro_recall += rec / k;
        r.macro_f1 += f1 / k;
    }

    // Marginal-based Cohen's kappa.
    double pe = 0.0;
    for (int c = 0; c < k; ++c)
        pe += static_cast<double>(rows[static_cast<size_t>(c)]) *
              static_cast<double>(cols[static_cast<size_t>(c)]) / (n * n);
    r.kappa = guarded_ratio(r.accuracy - pe, 1.0 - pe, "kappa", r.degenerate);

    // K-class correlation coefficient.
    double dot_pt = 0.0, pp = 0.0, tt = 0.0;
    for (int c = 0; c < k; ++c) {
        const double p = static_cast<double>(cols[static_cast<size_t>(c)]);
        const double t = static_cast<double>(rows[static_cast<size_t>(c)]);
        dot_pt += p * t;
        pp += p * p;
        tt += t * t;
    }
    const double cdiag = static_cast<double>(cm.diagonal_sum());
    r.mcc = guarded_ratio(cdiag * n - dot_pt, std::sqrt((n * n - pp) * (n * n - tt)), "mcc",
                          r.degenerate);

    r.tpr_rows.assign(static_cast<size_t>(k), std::vector<double>(static_cast<size_t>(k), 0.0));
    for (int t = 0; t < k; ++t) {
        const auto row_total = rows[static_cast<size_t>(t)];
        if (row_total == 0) {
            r.degenerate.push_back("tpr_row[" + std::to_string(t) + "]");
            continue;
        }
        for (int p = 0; p < k; ++p)
            r.tpr_rows[static_cast<size_t>(t)][static_cast<size_t>(p)] =
                static_cast<double>(cm.at(t, p)) / static_cast<double>(row_total);
    }

    r.confusion.assign(static_cast<size_t>(k), std::vector<int64_t>(static_cast<size_t>(k), 0));
    for (int t = 0; t < k; ++t)
        for (int p = 0; p < k; ++p)
            r.confusion[static_cast<size_t>(t)][static_cast<size_t>(p)] = cm.at(t, p);
    return r;
}

std::vector<std::vector<double>> tpr_rows(const ConfusionMatrix& cm) {
    const int k = cm.k();
    const auto rows = cm.row_sums();
    std::vector<std::vector<double>> out(static_cast<size_t>(k),
                                         std::vector<double>(static_cast<size_t>(k), 0.0));
    for (int t = 0; t < k; ++t) {
        if (rows[static_cast<size_t>(t)] == 0)
            throw EmptyRow("confusion row " + std::to_string(t) + " has no samples");
        for (int p = 0; p < k; ++p)
            out[static_cast<size_t>(t)][static_cast<size_t>(p)] =
                static_cast<double>(cm.at(t, p)) / static_cast<double>(rows[static_cast<size_t>(t)]);
    }
    return out;
}

nlohmann::json to_json(const MetricsReport& r) {
    return nlohmann::json{
        {"accuracy", r.accuracy},
        {"precision", r.macro_precision},
        {"recall", r.macro_recall},
        {"f1_score", r.macro_f1},
        {"kappa", r.kappa},
        {"mcc", r.mcc},
        {"per_class_precision", r.per_class_precision},
        {"per_class_recall", r.per_class_recall},
        {"per_class_f1", r.per_class_f1},
        {"confusion", r.confusion},
        {"tpr_rows", r.tpr_rows},
        {"degenerate", r.degenerate},
    };
}

std::string render_confusion(const ConfusionMatrix& cm,
                             std::span<const std::string_view> class_names) {
    const int k = cm.k();
    const auto rows = cm.row_sums();
    auto name = [&class_names, k](int i) -> std::string {
        if (i < static_cast<int>(class_names.size())) return std::string(class_names[i]);
        return "class" + std::to_string(i);
    };
    size_t width = 8;
    for (int i = 0; i < k; ++i) width = std::max(width, name(i).size() + 2);

    std::ostringstream os;
    os << std::left << std::setw(static_cast<int>(width)) << "true\\pred";
    for (int p = 0; p < k; ++p) os << std::setw(static_cast<int>(width)) << name(p);
    os << "n\n";
    for (int t = 0; t < k; ++t) {
        os << std::setw(static_cast<int>(width)) << name(t);
        for (int p = 0; p < k; ++p) {
            std::ostringstream cell;
            if (rows[static_cast<size_t>(t)] == 0)
                cell << "-";
            else
                cell << std::fixed << std::setprecision(4)
                     << static_cast<double>(cm.at(t, p)) /
                            static_cast<double>(rows[static_cast<size_t>(t)]);
            os << std::setw(static_cast<int>(width)) << cell.str();
        }
        os << rows[static_cast<size_t>(t)] << "\n";
    }
    return os.str();
}

}  // namespace syswatch
