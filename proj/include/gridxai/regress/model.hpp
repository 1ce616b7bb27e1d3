#pragma once

// Regressor families trained on binary threat labels: ordinary least squares,
// a single CART tree, random forest, extra-trees, gradient boosting and
// AdaBoost.R2.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "gridxai/core_model.hpp"
#include "gridxai/detail/parallel.hpp"
#include "gridxai/detail/random.hpp"
#include "gridxai/ingest.hpp"
#include "gridxai/regress/tree.hpp"

namespace gridxai {

enum class ModelKind : std::uint8_t { Linear, Cart, RandomForest, ExtraTrees, GradientBoosting, AdaBoost };

inline constexpr std::array<ModelKind, 6> kAllModelKinds = {
    ModelKind::Linear,     ModelKind::Cart,             ModelKind::RandomForest,
    ModelKind::ExtraTrees, ModelKind::GradientBoosting, ModelKind::AdaBoost,
};

inline std::string_view to_string(ModelKind kind) {
    switch (kind) {
    case ModelKind::Linear: return "linear";
    case ModelKind::Cart: return "cart";
    case ModelKind::RandomForest: return "random-forest";
    case ModelKind::ExtraTrees: return "extra-trees";
    case ModelKind::GradientBoosting: return "gradient-boosting";
    case ModelKind::AdaBoost: return "adaboost";
    }
    throw Error("invalid model kind");
}

inline ModelKind model_kind_from_string(std::string_view name) {
    for (auto k : kAllModelKinds) {
        if (to_string(k) == name) return k;
    }
    throw Error("unknown model kind '" + std::string(name) + "'");
}

struct ModelSpec {
    ModelKind kind = ModelKind::RandomForest;
    std::size_t n_estimators = 100;
    std::size_t max_depth = 0;   // 0 = unlimited
    std::size_t min_samples_leaf = 1;
    double learning_rate = 0.1;  // gradient boosting only
    std::size_t max_features = 0; // 0 = family default
    std::uint64_t seed = 0;
    bool standardize = false;

    /// Library defaults for each family.
    static ModelSpec defaults(ModelKind kind, std::uint64_t seed = 0) {
        ModelSpec s;
        s.kind = kind;
        s.seed = seed;
        switch (kind) {
        case ModelKind::Linear:
            s.n_estimators = 0;
            break;
        case ModelKind::Cart:
            s.n_estimators = 1;
            break;
        case ModelKind::RandomForest:
        case ModelKind::ExtraTrees:
            s.n_estimators = 100;
            break;
        case ModelKind::GradientBoosting:
            s.n_estimators = 100;
            s.max_depth = 3;
            s.learning_rate = 0.1;
            break;
        case ModelKind::AdaBoost:
            s.n_estimators = 50;
            s.max_depth = 1;
            break;
        }
        return s;
    }

    /// Features examined per split for a dataset with m features.
    std::size_t resolved_max_features(std::size_t m) const {
        if (max_features != 0) return std::min(max_features, m);
        if (kind == ModelKind::RandomForest) return std::max<std::size_t>(1, (m + 2) / 3);
        return m;
    }

    void validate() const {
        const bool ensemble = kind == ModelKind::RandomForest || kind == ModelKind::ExtraTrees ||
                              kind == ModelKind::GradientBoosting || kind == ModelKind::AdaBoost;
        if (ensemble && n_estimators == 0) throw Error("n_estimators must be positive");
        if (kind != ModelKind::Linear && min_samples_leaf == 0) throw Error("min_samples_leaf must be positive");
        if (kind == ModelKind::GradientBoosting && !(learning_rate > 0.0 && std::isfinite(learning_rate))) {
            throw Error("learning_rate must be positive");
        }
    }

    bool operator==(const ModelSpec&) const = default;
};

struct LinearFit {
    std::vector<double> weights; // intercept first, then one weight per feature
    bool operator==(const LinearFit&) const = default;
};

/// Averaged trees: a single CART tree, a random forest or extra-trees.
struct ForestFit {
    std::vector<RegressionTree> trees;
    bool operator==(const ForestFit&) const = default;
};

struct BoostedFit {
    double init = 0.0;
    double learning_rate = 0.1;
    std::vector<RegressionTree> stages;
    bool operator==(const BoostedFit&) const = default;
};

struct AdaBoostFit {
    std::vector<RegressionTree> learners;
    std::vector<double> weights;
    bool operator==(const AdaBoostFit&) const = default;
};

using ModelFit = std::variant<LinearFit, ForestFit, BoostedFit, AdaBoostFit>;

struct RegressorModel {
    ModelSpec spec;
    std::size_t feature_count = 0;
    std::string schema_name = std::string(kWustlSchema);
    double training_mse = 0.0;
    Scaler scaler;  // empty unless spec.standardize
    ModelFit fit;
    // Raw training features, kept so explanations can sample a background.
    std::vector<FeatureVector> training_rows;

    bool is_linear() const noexcept { return std::holds_alternative<LinearFit>(fit); }

    /// Intercept and per-feature weights in raw feature units (Linear only).
    std::vector<double> raw_linear_weights() const {
        const auto* lin = std::get_if<LinearFit>(&fit);
        if (!lin) throw Error("model is not linear");
        if (scaler.empty()) return lin->weights;
        std::vector<double> w(lin->weights.size());
        w[0] = lin->weights[0];
        for (std::size_t m = 0; m < feature_count; ++m) {
            if (scaler.passthrough[m]) {
                w[m + 1] = lin->weights[m + 1];
            } else {
                w[m + 1] = lin->weights[m + 1] / scaler.stddevs[m];
                w[0] -= lin->weights[m + 1] * scaler.means[m] / scaler.stddevs[m];
            }
        }
        return w;
    }
};

namespace detail {

inline double predict_fit(const ModelFit& fit, std::span<const double> x) {
    struct Visitor {
        std::span<const double> x;
        double operator()(const LinearFit& f) const {
            double s = f.weights[0];
            for (std::size_t m = 0; m < x.size(); ++m) s += f.weights[m + 1] * x[m];
            return s;
        }
        double operator()(const ForestFit& f) const {
            double s = 0.0;
            for (const auto& t : f.trees) s += t.predict(x);
            return s / static_cast<double>(f.trees.size());
        }
        double operator()(const BoostedFit& f) const {
            double s = f.init;
            for (const auto& t : f.stages) s += f.learning_rate * t.predict(x);
            return s;
        }
        double operator()(const AdaBoostFit& f) const {
            const std::size_t k = f.learners.size();
            thread_local std::vector<std::pair<double, double>> pw;
            pw.resize(k);
            double total = 0.0;
            for (std::size_t i = 0; i < k; ++i) {
                pw[i] = {f.learners[i].predict(x), f.weights[i]};
                total += f.weights[i];
            }
            std::stable_sort(pw.begin(), pw.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
            double cum = 0.0;
            for (const auto& [p, w] : pw) {
                cum += w;
                if (cum >= 0.5 * total) return p;
            }
            return pw.back().first;
        }
    };
    return std::visit(Visitor{x}, fit);
}

} // namespace detail

/// Score of one feature vector. Pure and deterministic.
inline double predict(const RegressorModel& model, std::span<const double> x) {
    if (x.size() != model.feature_count) {
        throw Error("feature dimension mismatch: model expects " + std::to_string(model.feature_count) + ", got " +
                    std::to_string(x.size()));
    }
    if (model.scaler.empty()) return detail::predict_fit(model.fit, x);
    constexpr std::size_t kInline = 32;
    if (x.size() <= kInline) {
        std::array<double, kInline> buf;
        std::copy(x.begin(), x.end(), buf.begin());
        model.scaler.apply_in_place(std::span(buf.data(), x.size()));
        return detail::predict_fit(model.fit, std::span<const double>(buf.data(), x.size()));
    }
    std::vector<double> buf(x.begin(), x.end());
    model.scaler.apply_in_place(buf);
    return detail::predict_fit(model.fit, buf);
}

inline double predict(const RegressorModel& model, const FeatureVector& x) { return predict(model, x.values()); }

inline std::vector<double> predict_all(const RegressorModel& model, const MessageDataset& ds) {
    std::vector<double> out(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) out[i] = predict(model, ds.messages[i].features);
    return out;
}

namespace detail {

/// Least squares on centred, unit-variance columns; weights mapped back to
/// the input units. Zero-variance columns get weight 0.
inline LinearFit fit_linear(const TrainingMatrix& x, std::span<const double> y) {
    const std::size_t n = x.rows;
    const std::size_t m = x.features();
    std::vector<double> mean(m, 0.0), scale(m, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
        for (double v : x.columns[j]) mean[j] += v;
        mean[j] /= static_cast<double>(n);
        for (double v : x.columns[j]) scale[j] += (v - mean[j]) * (v - mean[j]);
        scale[j] = std::sqrt(scale[j] / static_cast<double>(n));
    }
    double y_mean = 0.0;
    for (double v : y) y_mean += v;
    y_mean /= static_cast<double>(n);

    Eigen::MatrixXd a(n, m);
    Eigen::VectorXd b(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                scale[j] > 0.0 ? (x.columns[j][i] - mean[j]) / scale[j] : 0.0;
        }
        b(static_cast<Eigen::Index>(i)) = y[i] - y_mean;
    }
    // Exact linear relations between columns (total = src + dst) survive
    // scaling only up to rounding; treat pivots below 1e-9 relative as zero so
    // the minimum-norm solution is returned instead of huge opposing weights.
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(a.rows(), a.cols());
    cod.setThreshold(1e-9);
    cod.compute(a);
    Eigen::VectorXd beta = cod.solve(b);

    LinearFit fit;
    fit.weights.assign(m + 1, 0.0);
    fit.weights[0] = y_mean;
    for (std::size_t j = 0; j < m; ++j) {
        if (scale[j] > 0.0) {
            fit.weights[j + 1] = beta(static_cast<Eigen::Index>(j)) / scale[j];
            fit.weights[0] -= fit.weights[j + 1] * mean[j];
        }
    }
    // One refinement step on the raw-unit residuals.
    Eigen::VectorXd r(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = fit.weights[0];
        for (std::size_t j = 0; j < m; ++j) s += fit.weights[j + 1] * x.columns[j][i];
        r(static_cast<Eigen::Index>(i)) = y[i] - s;
    }
    double r_mean = r.mean();
    Eigen::VectorXd rc = r.array() - r_mean;
    Eigen::VectorXd delta = cod.solve(rc);
    fit.weights[0] += r_mean;
    for (std::size_t j = 0; j < m; ++j) {
        if (scale[j] > 0.0) {
            const double dw = delta(static_cast<Eigen::Index>(j)) / scale[j];
            fit.weights[j + 1] += dw;
            fit.weights[0] -= dw * mean[j];
        }
    }
    return fit;
}

inline std::vector<std::size_t> bootstrap_rows(std::size_t n, Rng& rng) {
    std::vector<std::size_t> rows(n);
    for (auto& r : rows) r = static_cast<std::size_t>(rng.below(n));
    return rows;
}

inline ForestFit fit_forest(const TrainingMatrix& x, std::span<const double> y, const ModelSpec& spec) {
    const bool bootstrap = spec.kind == ModelKind::RandomForest;
    TreeParams params;
    params.max_depth = spec.max_depth;
    params.min_samples_leaf = spec.min_samples_leaf;
    params.max_features = spec.resolved_max_features(x.features());
    params.random_thresholds = spec.kind == ModelKind::ExtraTrees;

    ForestFit fit;
    fit.trees.resize(spec.n_estimators);
    parallel_for(spec.n_estimators, [&](std::size_t t) {
        Rng rng(derive_seed(spec.seed, t));
        std::vector<std::size_t> rows;
        if (bootstrap) {
            rows = bootstrap_rows(x.rows, rng);
        } else {
            rows.resize(x.rows);
            std::iota(rows.begin(), rows.end(), std::size_t{0});
        }
        fit.trees[t] = grow_tree(x, y, std::move(rows), params, &rng);
    });
    return fit;
}

inline BoostedFit fit_boosted(const TrainingMatrix& x, std::span<const double> y, const ModelSpec& spec) {
    const std::size_t n = x.rows;
    BoostedFit fit;
    fit.learning_rate = spec.learning_rate;
    fit.init = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);

    TreeParams params;
    params.max_depth = spec.max_depth;
    params.min_samples_leaf = spec.min_samples_leaf;
    params.max_features = spec.resolved_max_features(x.features());

    std::vector<double> current(n, fit.init);
    std::vector<double> residual(n);
    std::vector<double> row(x.features());
    for (std::size_t stage = 0; stage < spec.n_estimators; ++stage) {
        for (std::size_t i = 0; i < n; ++i) residual[i] = y[i] - current[i];
        Rng rng(derive_seed(spec.seed, stage));
        auto tree = grow_tree(x, residual, params, &rng);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < row.size(); ++j) row[j] = x.columns[j][i];
            current[i] += fit.learning_rate * tree.predict(row);
        }
        fit.stages.push_back(std::move(tree));
    }
    return fit;
}

/// AdaBoost.R2 with linear loss; each round fits a tree to a weighted
/// bootstrap resample.
inline AdaBoostFit fit_adaboost(const TrainingMatrix& x, std::span<const double> y, const ModelSpec& spec) {
    const std::size_t n = x.rows;
    TreeParams params;
    params.max_depth = spec.max_depth;
    params.min_samples_leaf = spec.min_samples_leaf;
    params.max_features = spec.resolved_max_features(x.features());

    std::vector<double> sample_weight(n, 1.0 / static_cast<double>(n));
    std::vector<double> cdf(n);
    std::vector<double> pred(n);
    std::vector<double> row(x.features());
    AdaBoostFit fit;

    for (std::size_t round = 0; round < spec.n_estimators; ++round) {
        Rng rng(derive_seed(spec.seed, round));
        std::partial_sum(sample_weight.begin(), sample_weight.end(), cdf.begin());
        std::vector<std::size_t> rows(n);
        for (auto& r : rows) {
            const double u = rng.uniform() * cdf.back();
            auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
            r = std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), n - 1);
        }
        auto tree = grow_tree(x, y, std::move(rows), params, &rng);

        double max_err = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < row.size(); ++j) row[j] = x.columns[j][i];
            pred[i] = tree.predict(row);
            max_err = std::max(max_err, std::abs(y[i] - pred[i]));
        }
        if (max_err == 0.0) {
            fit.learners.push_back(std::move(tree));
            fit.weights.push_back(1.0);
            break;
        }
        double avg_loss = 0.0;
        for (std::size_t i = 0; i < n; ++i) avg_loss += sample_weight[i] * std::abs(y[i] - pred[i]) / max_err;
        if (avg_loss >= 0.5) {
            if (fit.learners.empty()) {
                fit.learners.push_back(std::move(tree));
                fit.weights.push_back(1.0);
            }
            break;
        }
        const double beta = avg_loss / (1.0 - avg_loss);
        fit.learners.push_back(std::move(tree));
        fit.weights.push_back(std::log(1.0 / beta));

        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double loss = std::abs(y[i] - pred[i]) / max_err;
            sample_weight[i] *= std::pow(beta, 1.0 - loss);
            total += sample_weight[i];
        }
        if (!(total > 0.0)) break;
        for (auto& w : sample_weight) w /= total;
    }
    return fit;
}

} // namespace detail

/// Fits a model of `spec.kind` by least squares on the 0/1 labels.
inline RegressorModel train(const ModelSpec& spec, const MessageDataset& train_set) {
    spec.validate();
    if (train_set.empty()) throw DataError("cannot train on an empty dataset");
    for (const auto& msg : train_set.messages) {
        if (msg.features.size() != train_set.feature_count) {
            throw DataError("message " + std::to_string(msg.id) + " has " + std::to_string(msg.features.size()) +
                            " features, dataset declares " + std::to_string(train_set.feature_count));
        }
        if (msg.label != 0 && msg.label != 1) {
            throw DataError("message " + std::to_string(msg.id) + " label is not 0 or 1");
        }
    }

    RegressorModel model;
    model.spec = spec;
    model.feature_count = train_set.feature_count;
    model.schema_name = train_set.schema_name;
    if (model.schema_name.starts_with(kStandardizedPrefix)) {
        model.schema_name = model.schema_name.substr(kStandardizedPrefix.size());
    }
    model.training_rows.reserve(train_set.size());
    for (const auto& msg : train_set.messages) model.training_rows.push_back(msg.features);

    const MessageDataset* fit_set = &train_set;
    MessageDataset scaled;
    if (spec.standardize) {
        model.scaler = Scaler::fit(train_set);
        scaled = apply_scaler(train_set, model.scaler);
        fit_set = &scaled;
    }
    const auto x = TrainingMatrix::from(*fit_set);
    const auto y = fit_set->labels();

    switch (spec.kind) {
    case ModelKind::Linear: model.fit = detail::fit_linear(x, y); break;
    case ModelKind::Cart: {
        ForestFit f;
        TreeParams params;
        params.max_depth = spec.max_depth;
        params.min_samples_leaf = spec.min_samples_leaf;
        params.max_features = spec.resolved_max_features(x.features());
        detail::Rng rng(detail::derive_seed(spec.seed, 0));
        f.trees.push_back(grow_tree(x, y, params, &rng));
        model.fit = std::move(f);
        break;
    }
    case ModelKind::RandomForest:
    case ModelKind::ExtraTrees: model.fit = detail::fit_forest(x, y, spec); break;
    case ModelKind::GradientBoosting: model.fit = detail::fit_boosted(x, y, spec); break;
    case ModelKind::AdaBoost: model.fit = detail::fit_adaboost(x, y, spec); break;
    }

    double sse = 0.0;
    for (const auto& msg : train_set.messages) {
        const double e = static_cast<double>(msg.label) - predict(model, msg.features);
        sse += e * e;
    }
    model.training_mse = sse / static_cast<double>(train_set.size());
    return model;
}

} // namespace gridxai
