#pragma once

// Slot-by-slot watchdog: detect, explain, then cluster each slot's
// attributions, with an optional clustering pass over the whole run.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "gridxai/core_model.hpp"
#include "gridxai/explain.hpp"
#include "gridxai/regress/metrics.hpp"
#include "gridxai/regress/model.hpp"
#include "gridxai/report.hpp"
#include "gridxai/severity.hpp"

namespace gridxai {

struct PipelineConfig {
    double threshold = kDefaultThreshold;
    std::size_t background_size = kDefaultBackgroundSize;
    std::uint64_t background_seed = 0;
    std::size_t slot_size = 100;
    std::size_t max_slots = 0; // 0 = consume the whole stream
    std::size_t k = 2;
    Linkage linkage = Linkage::Ward;
    bool gate = false;
    bool global_clustering = true;
    std::string model_path;
    std::string input_path;

    void validate() const {
        if (!std::isfinite(threshold)) throw Error("threshold must be finite");
        if (slot_size == 0) throw Error("slot size must be positive");
        if (k == 0) throw Error("k must be positive");
        if (background_size == 0) throw Error("background size must be positive");
    }
};

struct SlotReport {
    std::size_t index = 0;
    std::vector<MessageId> ids;
    std::vector<double> scores;
    std::vector<int> decisions;
    ShapMatrix shap;
    double mse = 0.0;
    std::optional<Dendrogram> dendrogram; // absent for single-message slots
    std::optional<SeverityReport> severity;
};

struct WatchdogReport {
    PipelineConfig config;
    std::vector<SlotReport> slots;
    std::optional<EvalMetrics> metrics;
    std::optional<Dendrogram> global_dendrogram;
    std::optional<SeverityReport> global_severity;

    std::size_t decision_count() const {
        std::size_t n = 0;
        for (const auto& s : slots) n += s.decisions.size();
        return n;
    }
};

namespace detail {

inline std::pair<std::optional<Dendrogram>, std::optional<SeverityReport>> slot_severity(const ShapMatrix& shap,
                                                                                         std::size_t k,
                                                                                         Linkage linkage) {
    if (shap.rows() < 2) return {};
    auto tree = agglomerate(shap, linkage);
    auto report = risk_report(shap, tree, std::min(k, shap.rows()));
    return {std::move(tree), std::move(report)};
}

} // namespace detail

inline WatchdogReport run_watchdog(const PipelineConfig& config, const RegressorModel& model,
                                   const BackgroundSet& background, const MessageDataset& stream) {
    config.validate();
    if (!stream.empty() && stream.feature_count != model.feature_count) {
        throw DataError("stream has " + std::to_string(stream.feature_count) + " features, model expects " +
                        std::to_string(model.feature_count));
    }
    WatchdogReport report;
    report.config = config;
    if (stream.empty()) return report;

    std::size_t slots = (stream.size() + config.slot_size - 1) / config.slot_size;
    if (config.max_slots != 0) slots = std::min(slots, config.max_slots);

    ExplainOptions options;
    options.gate = config.gate;

    ShapMatrix all;
    std::vector<double> all_scores;
    std::vector<double> all_labels;

    for (std::size_t t = 0; t < slots; ++t) {
        const std::size_t begin = t * config.slot_size;
        const std::size_t end = std::min(stream.size(), begin + config.slot_size);
        const std::size_t count = end - begin;

        SlotReport slot;
        slot.index = t;
        slot.ids.resize(count);
        slot.scores.resize(count);
        slot.decisions.resize(count);
        std::vector<std::pair<ShapleyExplanation, std::size_t>> rows(count);
        detail::parallel_for(count, [&](std::size_t i) {
            const auto& msg = stream.messages[begin + i];
            rows[i] = explain_message(model, msg.features, background, options, msg.id);
        });

        slot.shap.feature_names = feature_names(model.schema_name);
        if (slot.shap.feature_names.size() != model.feature_count) {
            slot.shap.feature_names = feature_names("generic-" + std::to_string(model.feature_count));
        }
        if (all.feature_names.empty()) all.feature_names = slot.shap.feature_names;

        double se = 0.0;
        for (std::size_t i = 0; i < count; ++i) {
            const auto& msg = stream.messages[begin + i];
            slot.ids[i] = msg.id;
            slot.scores[i] = rows[i].first.prediction;
            slot.decisions[i] = decide(slot.scores[i], config.threshold);
            const double err = static_cast<double>(msg.label) - slot.scores[i];
            se += err * err;
            slot.shap.append(rows[i].first, rows[i].second);
            all.append(rows[i].first, rows[i].second);
            all_scores.push_back(slot.scores[i]);
            all_labels.push_back(static_cast<double>(msg.label));
        }
        slot.mse = se / static_cast<double>(count);
        std::tie(slot.dendrogram, slot.severity) = detail::slot_severity(slot.shap, config.k, config.linkage);
        report.slots.push_back(std::move(slot));
    }

    report.metrics = metrics_from_scores(all_labels, all_scores, config.threshold);
    if (config.global_clustering) {
        std::tie(report.global_dendrogram, report.global_severity) =
            detail::slot_severity(all, config.k, config.linkage);
    }
    return report;
}

inline Json to_json(const PipelineConfig& c) {
    return Json{{"threshold", c.threshold},
                {"background_size", c.background_size},
                {"background_seed", c.background_seed},
                {"slot_size", c.slot_size},
                {"max_slots", c.max_slots},
                {"k", c.k},
                {"linkage", std::string(to_string(c.linkage))},
                {"gate", c.gate},
                {"global_clustering", c.global_clustering},
                {"model_path", c.model_path},
                {"input_path", c.input_path}};
}

inline Json to_json(const WatchdogReport& r) {
    Json slots = Json::array();
    for (const auto& s : r.slots) {
        Json shap_rows = Json::array();
        for (std::size_t i = 0; i < s.shap.rows(); ++i) {
            const auto row = s.shap.row(i);
            shap_rows.push_back(std::vector<double>(row.begin(), row.end()));
        }
        Json slot{{"slot", s.index},
                  {"size", s.ids.size()},
                  {"ids", s.ids},
                  {"decisions", s.decisions},
                  {"threats", std::count(s.decisions.begin(), s.decisions.end(), 1)},
                  {"scores", s.scores},
                  {"mse", s.mse},
                  {"base_values", s.shap.base_values},
                  {"suppressed", s.shap.suppressed},
                  {"shap", shap_rows}};
        if (s.dendrogram) slot["dendrogram"] = dendrogram_digest(*s.dendrogram);
        if (s.severity) slot["severity"] = to_json(*s.severity, false);
        slots.push_back(std::move(slot));
    }
    Json out{{"config", to_json(r.config)}};
    out["feature_names"] = r.slots.empty() ? Json::array() : Json(r.slots.front().shap.feature_names);
    out["slot_count"] = r.slots.size();
    out["decision_count"] = r.decision_count();
    out["metrics"] = r.metrics ? to_json(*r.metrics) : Json(nullptr);
    out["slots"] = std::move(slots);
    if (r.global_dendrogram) {
        out["global"] = Json{{"dendrogram", dendrogram_digest(*r.global_dendrogram)},
                             {"severity", to_json(*r.global_severity, false)}};
    } else {
        out["global"] = nullptr;
    }
    return out;
}

} // namespace gridxai
