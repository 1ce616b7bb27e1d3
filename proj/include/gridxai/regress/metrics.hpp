#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "gridxai/core_model.hpp"
#include "gridxai/regress/model.hpp"

namespace gridxai {

inline constexpr double kDefaultThreshold = 0.5;

/// Threat decision from a regression score. Ties count as attacks.
inline int decide(double score, double threshold = kDefaultThreshold) {
    if (!std::isfinite(threshold)) throw Error("decision threshold must be finite");
    return score >= threshold ? 1 : 0;
}

struct EvalMetrics {
    std::size_t tn = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tp = 0;
    // Per-class normalised rates; 0 when the class is absent.
    double tn_rate = 0.0;
    double fp_rate = 0.0;
    double fn_rate = 0.0;
    double tp_rate = 0.0;
    double r2 = 0.0;
    double mse = 0.0;
    double mae = 0.0;
    // Rows whose score exceeds the label (the "prediction never exceeds the
    // actual value" condition, reported rather than enforced).
    std::size_t overestimates = 0;

    std::size_t total() const noexcept { return tn + fp + fn + tp; }
};

/// Coefficient of determination, 1 - SS_res / SS_tot; 0 when SS_tot is 0.
inline double r_squared(std::span<const double> truth, std::span<const double> scores) {
    if (truth.size() != scores.size()) throw Error("r_squared: length mismatch");
    if (truth.empty()) throw Error("r_squared: empty input");
    double mean = 0.0;
    for (double v : truth) mean += v;
    mean /= static_cast<double>(truth.size());
    double ss_res = 0.0;
    double ss_tot = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        ss_res += (truth[i] - scores[i]) * (truth[i] - scores[i]);
        ss_tot += (truth[i] - mean) * (truth[i] - mean);
    }
    if (ss_tot == 0.0) return 0.0;
    return 1.0 - ss_res / ss_tot;
}

inline EvalMetrics metrics_from_scores(std::span<const double> labels, std::span<const double> scores,
                                       double threshold = kDefaultThreshold) {
    if (labels.size() != scores.size()) throw Error("labels and scores differ in length");
    if (labels.empty()) throw DataError("cannot evaluate on an empty set");
    EvalMetrics e;
    double se = 0.0;
    double ae = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int truth = labels[i] >= 0.5 ? 1 : 0;
        const int d = decide(scores[i], threshold);
        if (truth == 0) (d == 0 ? e.tn : e.fp) += 1;
        else (d == 0 ? e.fn : e.tp) += 1;
        const double err = labels[i] - scores[i];
        se += err * err;
        ae += std::abs(err);
        if (scores[i] > labels[i]) ++e.overestimates;
    }
    const auto n = static_cast<double>(labels.size());
    e.mse = se / n;
    e.mae = ae / n;
    if (e.tn + e.fp > 0) {
        e.tn_rate = static_cast<double>(e.tn) / static_cast<double>(e.tn + e.fp);
        e.fp_rate = static_cast<double>(e.fp) / static_cast<double>(e.tn + e.fp);
    }
    if (e.fn + e.tp > 0) {
        e.fn_rate = static_cast<double>(e.fn) / static_cast<double>(e.fn + e.tp);
        e.tp_rate = static_cast<double>(e.tp) / static_cast<double>(e.fn + e.tp);
    }
    e.r2 = r_squared(labels, scores);
    return e;
}

/// Scores every test message, thresholds it and summarises the outcome.
inline EvalMetrics evaluate(const RegressorModel& model, const MessageDataset& test,
                            double threshold = kDefaultThreshold) {
    if (test.empty()) throw DataError("cannot evaluate on an empty test set");
    if (test.feature_count != model.feature_count) {
        throw DataError("test set has " + std::to_string(test.feature_count) + " features, model expects " +
                        std::to_string(model.feature_count));
    }
    const auto scores = predict_all(model, test);
    const auto labels = test.labels();
    return metrics_from_scores(labels, scores, threshold);
}

} // namespace gridxai
