#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "mistfed/errors.hpp"
#include "mistfed/param_vector.hpp"

namespace mistfed {

struct ClassificationMetrics {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    /// Set when any precision/recall/F1 denominator was zero (the affected
    /// value is reported as 0).
    bool degenerate = false;
};

namespace detail {

struct BinaryCounts {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

inline BinaryCounts count_binary(std::span<const int> predictions, std::span<const int> labels,
                                 int positive_class) {
    BinaryCounts c;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const bool pred_pos = predictions[i] == positive_class;
        const bool is_pos = labels[i] == positive_class;
        if (pred_pos && is_pos) ++c.tp;
        else if (pred_pos && !is_pos) ++c.fp;
        else if (!pred_pos && is_pos) ++c.fn;
        else ++c.tn;
    }
    return c;
}

inline double safe_ratio(std::size_t num, std::size_t den, bool& degenerate) {
    if (den == 0) {
        degenerate = true;
        return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace detail

/// Accuracy / precision / recall / F1. Binary when the observed label and
/// prediction values span at most two classes (computed against
/// positive_class); otherwise macro-averaged one-vs-rest.
inline ClassificationMetrics classification_metrics(std::span<const int> predictions,
                                                    std::span<const int> labels,
                                                    int positive_class) {
    if (predictions.empty() || predictions.size() != labels.size()) {
        throw UsageError("classification_metrics: predictions and labels must be non-empty "
                         "and of equal length");
    }
    std::set<int> classes(labels.begin(), labels.end());
    classes.insert(predictions.begin(), predictions.end());

    ClassificationMetrics m;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        if (predictions[i] == labels[i]) ++correct;
    }
    m.accuracy = static_cast<double>(correct) / static_cast<double>(predictions.size());

    if (classes.size() <= 2) {
        const auto c = detail::count_binary(predictions, labels, positive_class);
        m.precision = detail::safe_ratio(c.tp, c.tp + c.fp, m.degenerate);
        m.recall = detail::safe_ratio(c.tp, c.tp + c.fn, m.degenerate);
        const double pr = m.precision + m.recall;
        if (pr > 0.0) {
            m.f1 = 2.0 * m.precision * m.recall / pr;
        } else {
            m.f1 = 0.0;
            m.degenerate = true;
        }
        return m;
    }

    double prec_sum = 0.0, rec_sum = 0.0, f1_sum = 0.0;
    for (int cls : classes) {
        const auto c = detail::count_binary(predictions, labels, cls);
        const double p = detail::safe_ratio(c.tp, c.tp + c.fp, m.degenerate);
        const double r = detail::safe_ratio(c.tp, c.tp + c.fn, m.degenerate);
        prec_sum += p;
        rec_sum += r;
        if (p + r > 0.0) {
            f1_sum += 2.0 * p * r / (p + r);
        } else {
            m.degenerate = true;
        }
    }
    const auto k = static_cast<double>(classes.size());
    m.precision = prec_sum / k;
    m.recall = rec_sum / k;
    m.f1 = f1_sum / k;
    return m;
}

struct CurvePoint {
    double threshold = 0.0;
    double x = 0.0;
    double y = 0.0;
};

struct RocCurve {
    std::vector<CurvePoint> points;  // (FPR, TPR), FPR ascending
    double auc = 0.0;
};

struct PrCurve {
    std::vector<CurvePoint> points;  // (recall, precision), recall ascending
    double auc = 0.0;                // average precision
};

namespace detail {

/// Indices sorted by score descending; equal scores form one tie group.
inline std::vector<std::size_t> score_order(std::span<const double> scores) {
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return idx;
}

}  // namespace detail

/// ROC curve with trapezoidal AUC. Thresholds are the unique scores plus a
/// +inf anchor; grouping ties makes the trapezoidal area coincide with the
/// pairwise rank statistic (ties counted 1/2).
inline RocCurve roc_auc(std::span<const double> scores, std::span<const int> labels,
                        int positive_class = 1) {
    if (scores.empty() || scores.size() != labels.size()) {
        throw UsageError("roc_auc: scores and labels must be non-empty and of equal length");
    }
    std::size_t pos = 0;
    for (int y : labels) pos += (y == positive_class) ? 1u : 0u;
    const std::size_t neg = labels.size() - pos;
    if (pos == 0 || neg == 0) throw UsageError("roc_auc: AUC undefined without both classes");

    const auto order = detail::score_order(scores);
    RocCurve curve;
    curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    std::size_t tp = 0, fp = 0;
    double prev_x = 0.0, prev_y = 0.0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        const double s = scores[order[i]];
        while (j < order.size() && scores[order[j]] == s) {
            if (labels[order[j]] == positive_class) ++tp;
            else ++fp;
            ++j;
        }
        const double x = static_cast<double>(fp) / static_cast<double>(neg);
        const double y = static_cast<double>(tp) / static_cast<double>(pos);
        curve.auc += (x - prev_x) * (y + prev_y) / 2.0;
        curve.points.push_back({s, x, y});
        prev_x = x;
        prev_y = y;
        i = j;
    }
    return curve;
}

/// Precision–recall curve; AUC is the average-precision step summation
/// sum_t (R_t - R_{t-1}) * P_t over descending score thresholds.
inline PrCurve pr_auc(std::span<const double> scores, std::span<const int> labels,
                      int positive_class = 1) {
    if (scores.empty() || scores.size() != labels.size()) {
        throw UsageError("pr_auc: scores and labels must be non-empty and of equal length");
    }
    std::size_t pos = 0;
    for (int y : labels) pos += (y == positive_class) ? 1u : 0u;
    if (pos == 0) throw UsageError("pr_auc: undefined without positive samples");

    const auto order = detail::score_order(scores);
    PrCurve curve;
    std::size_t tp = 0, fp = 0;
    double prev_recall = 0.0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        const double s = scores[order[i]];
        while (j < order.size() && scores[order[j]] == s) {
            if (labels[order[j]] == positive_class) ++tp;
            else ++fp;
            ++j;
        }
        const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        const double recall = static_cast<double>(tp) / static_cast<double>(pos);
        curve.auc += (recall - prev_recall) * precision;
        curve.points.push_back({s, recall, precision});
        prev_recall = recall;
        i = j;
    }
    return curve;
}

/// Macro one-vs-rest ROC-AUC over a per-sample class-probability matrix.
/// Classes missing either side are skipped; at least one class must be
/// scoreable.
inline double macro_ovr_roc_auc(const std::vector<std::vector<double>>& probabilities,
                                std::span<const int> labels) {
    if (probabilities.empty() || probabilities.size() != labels.size()) {
        throw UsageError("macro_ovr_roc_auc: probabilities and labels must match");
    }
    const std::size_t num_classes = probabilities.front().size();
    double total = 0.0;
    std::size_t counted = 0;
    std::vector<double> scores(labels.size());
    for (std::size_t cls = 0; cls < num_classes; ++cls) {
        std::size_t pos = 0;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            scores[i] = probabilities[i][cls];
            pos += (labels[i] == static_cast<int>(cls)) ? 1u : 0u;
        }
        if (pos == 0 || pos == labels.size()) continue;
        total += roc_auc(scores, labels, static_cast<int>(cls)).auc;
        ++counted;
    }
    if (counted == 0) throw UsageError("macro_ovr_roc_auc: no class has both outcomes");
    return total / static_cast<double>(counted);
}

inline double macro_ovr_pr_auc(const std::vector<std::vector<double>>& probabilities,
                               std::span<const int> labels) {
    if (probabilities.empty() || probabilities.size() != labels.size()) {
        throw UsageError("macro_ovr_pr_auc: probabilities and labels must match");
    }
    const std::size_t num_classes = probabilities.front().size();
    double total = 0.0;
    std::size_t counted = 0;
    std::vector<double> scores(labels.size());
    for (std::size_t cls = 0; cls < num_classes; ++cls) {
        std::size_t pos = 0;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            scores[i] = probabilities[i][cls];
            pos += (labels[i] == static_cast<int>(cls)) ? 1u : 0u;
        }
        if (pos == 0 || pos == labels.size()) continue;
        total += pr_auc(scores, labels, static_cast<int>(cls)).auc;
        ++counted;
    }
    if (counted == 0) throw UsageError("macro_ovr_pr_auc: no class has both outcomes");
    return total / static_cast<double>(counted);
}

struct DriftStats {
    std::vector<double> per_client;
    double mean = 0.0;
    double median = 0.0;
};

namespace detail {

inline double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    if (n % 2 == 1) return v[n / 2];
    return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

/// Relative L2 drift of each client model from the reference:
/// ||w_i - ref||_2 / max(||ref||_2, 1e-12).
inline DriftStats model_drift(std::span<const ParamVector> client_models,
                              const ParamVector& reference) {
    if (client_models.empty()) throw UsageError("model_drift: need at least one client model");
    const double denom = std::max(reference.norm2(), 1e-12);
    DriftStats stats;
    stats.per_client.reserve(client_models.size());
    for (const auto& w : client_models) {
        if (w.size() != reference.size()) {
            throw ConfigError("model_drift: client model length differs from reference");
        }
        double sq = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double d = w[i] - reference[i];
            sq += d * d;
        }
        stats.per_client.push_back(std::sqrt(sq) / denom);
    }
    stats.mean = std::accumulate(stats.per_client.begin(), stats.per_client.end(), 0.0) /
                 static_cast<double>(stats.per_client.size());
    stats.median = detail::median_of(stats.per_client);
    return stats;
}

struct RuntimeStats {
    double mean = 0.0;
    double median = 0.0;
    double min = 0.0;
    double max = 0.0;
};

inline RuntimeStats runtime_stats(std::span<const double> durations) {
    if (durations.empty()) throw UsageError("runtime_stats: need at least one duration");
    RuntimeStats s;
    s.mean = std::accumulate(durations.begin(), durations.end(), 0.0) /
             static_cast<double>(durations.size());
    s.median = detail::median_of({durations.begin(), durations.end()});
    const auto [lo, hi] = std::minmax_element(durations.begin(), durations.end());
    s.min = *lo;
    s.max = *hi;
    return s;
}

/// Writes "threshold,x,y" rows for external plotting.
inline void write_curve_csv(std::ostream& out, std::span<const CurvePoint> points) {
    out << "threshold,x,y\n";
    out << std::setprecision(17);
    for (const auto& p : points) out << p.threshold << ',' << p.x << ',' << p.y << '\n';
}

inline void write_curve_csv(const std::string& path, std::span<const CurvePoint> points) {
    std::ofstream out(path);
    if (!out) throw UsageError("write_curve_csv: cannot open " + path);
    write_curve_csv(out, points);
}

}  // namespace mistfed
