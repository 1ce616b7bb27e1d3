#pragma once

// JSON model files. Layout:
//   { "format": "gridxai-model", "version": 1, "spec": {...}, "feature_count": M,
//     "schema": "...", "training_mse": x, "scaler": {...} | null,
//     "fit": { "type": ..., ... }, "training_rows": [[...], ...] }
// Trees are stored as parallel arrays (feature, threshold, left, right, value, samples).

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "gridxai/regress/model.hpp"

namespace gridxai {

inline constexpr int kModelFormatVersion = 1;
inline constexpr std::string_view kModelFormatTag = "gridxai-model";

namespace detail {

using ojson = nlohmann::ordered_json;

inline ojson tree_to_json(const RegressionTree& tree) {
    ojson feature = ojson::array(), threshold = ojson::array(), left = ojson::array(), right = ojson::array(),
          value = ojson::array(), samples = ojson::array();
    for (const auto& n : tree.nodes()) {
        feature.push_back(n.feature);
        threshold.push_back(n.threshold);
        left.push_back(n.left);
        right.push_back(n.right);
        value.push_back(n.value);
        samples.push_back(n.samples);
    }
    return ojson{{"feature", feature}, {"threshold", threshold}, {"left", left},
                 {"right", right},     {"value", value},         {"samples", samples}};
}

inline RegressionTree tree_from_json(const ojson& j, std::size_t feature_count) {
    const auto& feature = j.at("feature");
    const std::size_t n = feature.size();
    if (n == 0) throw DataError("corrupt model file: empty tree");
    const auto& threshold = j.at("threshold");
    const auto& left = j.at("left");
    const auto& right = j.at("right");
    const auto& value = j.at("value");
    const auto& samples = j.at("samples");
    if (threshold.size() != n || left.size() != n || right.size() != n || value.size() != n || samples.size() != n) {
        throw DataError("corrupt model file: tree arrays differ in length");
    }
    std::vector<TreeNode> nodes(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& node = nodes[i];
        node.feature = feature[i].get<std::int32_t>();
        node.threshold = threshold[i].get<double>();
        node.left = left[i].get<std::int32_t>();
        node.right = right[i].get<std::int32_t>();
        node.value = value[i].get<double>();
        node.samples = samples[i].get<std::uint32_t>();
        if (node.feature >= 0) {
            const auto self = static_cast<std::int32_t>(i);
            const auto count = static_cast<std::int32_t>(n);
            if (static_cast<std::size_t>(node.feature) >= feature_count || node.left <= self || node.right <= self ||
                node.left >= count || node.right >= count) {
                throw DataError("corrupt model file: bad tree node " + std::to_string(i));
            }
        }
    }
    return RegressionTree(std::move(nodes));
}

inline ojson trees_to_json(const std::vector<RegressionTree>& trees) {
    ojson out = ojson::array();
    for (const auto& t : trees) out.push_back(tree_to_json(t));
    return out;
}

inline std::vector<RegressionTree> trees_from_json(const ojson& j, std::size_t feature_count) {
    std::vector<RegressionTree> out;
    for (const auto& t : j) out.push_back(tree_from_json(t, feature_count));
    if (out.empty()) throw DataError("corrupt model file: ensemble without trees");
    return out;
}

inline ojson spec_to_json(const ModelSpec& s) {
    return ojson{{"kind", std::string(to_string(s.kind))},
                 {"n_estimators", s.n_estimators},
                 {"max_depth", s.max_depth},
                 {"min_samples_leaf", s.min_samples_leaf},
                 {"learning_rate", s.learning_rate},
                 {"max_features", s.max_features},
                 {"seed", s.seed},
                 {"standardize", s.standardize}};
}

inline ModelSpec spec_from_json(const ojson& j) {
    ModelSpec s;
    s.kind = model_kind_from_string(j.at("kind").get<std::string>());
    s.n_estimators = j.at("n_estimators").get<std::size_t>();
    s.max_depth = j.at("max_depth").get<std::size_t>();
    s.min_samples_leaf = j.at("min_samples_leaf").get<std::size_t>();
    s.learning_rate = j.at("learning_rate").get<double>();
    s.max_features = j.at("max_features").get<std::size_t>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.standardize = j.at("standardize").get<bool>();
    return s;
}

inline ojson fit_to_json(const ModelFit& fit) {
    struct Visitor {
        ojson operator()(const LinearFit& f) const { return ojson{{"type", "linear"}, {"weights", f.weights}}; }
        ojson operator()(const ForestFit& f) const {
            return ojson{{"type", "forest"}, {"trees", trees_to_json(f.trees)}};
        }
        ojson operator()(const BoostedFit& f) const {
            return ojson{{"type", "boosted"},
                         {"init", f.init},
                         {"learning_rate", f.learning_rate},
                         {"stages", trees_to_json(f.stages)}};
        }
        ojson operator()(const AdaBoostFit& f) const {
            return ojson{{"type", "adaboost"}, {"weights", f.weights}, {"learners", trees_to_json(f.learners)}};
        }
    };
    return std::visit(Visitor{}, fit);
}

inline ModelFit fit_from_json(const ojson& j, std::size_t feature_count) {
    const auto type = j.at("type").get<std::string>();
    if (type == "linear") {
        LinearFit f{j.at("weights").get<std::vector<double>>()};
        if (f.weights.size() != feature_count + 1) throw DataError("corrupt model file: weight count");
        return f;
    }
    if (type == "forest") return ForestFit{trees_from_json(j.at("trees"), feature_count)};
    if (type == "boosted") {
        BoostedFit f;
        f.init = j.at("init").get<double>();
        f.learning_rate = j.at("learning_rate").get<double>();
        f.stages = trees_from_json(j.at("stages"), feature_count);
        return f;
    }
    if (type == "adaboost") {
        AdaBoostFit f;
        f.weights = j.at("weights").get<std::vector<double>>();
        f.learners = trees_from_json(j.at("learners"), feature_count);
        if (f.weights.size() != f.learners.size()) throw DataError("corrupt model file: learner weight count");
        return f;
    }
    throw DataError("corrupt model file: unknown fit type '" + type + "'");
}

} // namespace detail

inline nlohmann::ordered_json model_to_json(const RegressorModel& model) {
    using detail::ojson;
    ojson j;
    j["format"] = kModelFormatTag;
    j["version"] = kModelFormatVersion;
    j["spec"] = detail::spec_to_json(model.spec);
    j["feature_count"] = model.feature_count;
    j["schema"] = model.schema_name;
    j["training_mse"] = model.training_mse;
    if (model.scaler.empty()) {
        j["scaler"] = nullptr;
    } else {
        std::vector<bool> pass(model.scaler.passthrough.begin(), model.scaler.passthrough.end());
        j["scaler"] = ojson{{"means", model.scaler.means}, {"stddevs", model.scaler.stddevs}, {"passthrough", pass}};
    }
    j["fit"] = detail::fit_to_json(model.fit);
    ojson rows = ojson::array();
    for (const auto& r : model.training_rows) rows.push_back(std::vector<double>(r.values().begin(), r.values().end()));
    j["training_rows"] = std::move(rows);
    return j;
}

inline RegressorModel model_from_json(const nlohmann::ordered_json& j) {
    try {
        if (!j.is_object() || j.value("format", std::string{}) != kModelFormatTag) {
            throw DataError("corrupt model file: not a gridxai model");
        }
        const auto& version = j.at("version");
        if (!version.is_number_integer() || version.get<int>() != kModelFormatVersion) {
            throw DataError("unsupported model format version " + version.dump());
        }
        RegressorModel m;
        m.spec = detail::spec_from_json(j.at("spec"));
        m.feature_count = j.at("feature_count").get<std::size_t>();
        if (m.feature_count == 0) throw DataError("corrupt model file: zero features");
        m.schema_name = j.at("schema").get<std::string>();
        m.training_mse = j.at("training_mse").get<double>();
        if (!j.at("scaler").is_null()) {
            const auto& s = j.at("scaler");
            m.scaler.means = s.at("means").get<std::vector<double>>();
            m.scaler.stddevs = s.at("stddevs").get<std::vector<double>>();
            m.scaler.passthrough = s.at("passthrough").get<std::vector<bool>>();
            if (m.scaler.means.size() != m.feature_count || m.scaler.stddevs.size() != m.feature_count ||
                m.scaler.passthrough.size() != m.feature_count) {
                throw DataError("corrupt model file: scaler size");
            }
        }
        m.fit = detail::fit_from_json(j.at("fit"), m.feature_count);
        for (const auto& r : j.at("training_rows")) {
            auto values = r.get<std::vector<double>>();
            if (values.size() != m.feature_count) throw DataError("corrupt model file: training row width");
            m.training_rows.emplace_back(std::move(values));
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("corrupt model file: ") + e.what());
    }
}

inline void save_model(const RegressorModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(path.string() + ": cannot open for writing");
    out << model_to_json(model).dump() << '\n';
    if (!out) throw DataError(path.string() + ": write failed");
}

inline RegressorModel load_model(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw DataError(path.string() + ": file not found");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(path.string() + ": cannot open file");
    nlohmann::ordered_json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": corrupt model file: " + e.what());
    }
    return model_from_json(j);
}

} // namespace gridxai
