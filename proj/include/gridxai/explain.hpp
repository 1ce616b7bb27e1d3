#pragma once

// Exact Shapley attributions of regression scores.
//
// The value of a coalition S is the interventional expectation
//     v(S) = mean_b predict(x_S, b_{~S})
// over a fixed background sample. Attributions enumerate all 2^M coalitions
// with the Shapley weight s!(M-s-1)!/M!, so base + sum(contributions)
// reproduces the prediction. Linear models also have the closed form
// w_m * (x_m - E[x_m]).

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "gridxai/core_model.hpp"
#include "gridxai/detail/parallel.hpp"
#include "gridxai/detail/random.hpp"
#include "gridxai/detail/text.hpp"
#include "gridxai/regress/model.hpp"

namespace gridxai {

inline constexpr std::size_t kMaxExactFeatures = 16;
inline constexpr std::size_t kDefaultBackgroundSize = 100;

/// Background sample realising the expectations E[x_m] and E[h(x)].
class BackgroundSet {
public:
    BackgroundSet() = default;

    BackgroundSet(const RegressorModel& model, std::vector<FeatureVector> rows, std::uint64_t seed)
        : rows_(std::move(rows)), seed_(seed) {
        if (rows_.empty()) throw Error("background set must not be empty");
        width_ = rows_.front().size();
        flat_.reserve(rows_.size() * width_);
        for (const auto& r : rows_) {
            if (r.size() != width_) throw Error("background rows differ in length");
            flat_.insert(flat_.end(), r.values().begin(), r.values().end());
        }
        if (width_ != model.feature_count) throw Error("background width does not match the model");
        means_.assign(width_, 0.0);
        for (const auto& r : rows_) {
            for (std::size_t m = 0; m < width_; ++m) means_[m] += r[m];
        }
        for (auto& v : means_) v /= static_cast<double>(rows_.size());
        mean_prediction_ = recompute_mean_prediction(model);
    }

    const std::vector<FeatureVector>& rows() const noexcept { return rows_; }
    std::size_t size() const noexcept { return rows_.size(); }
    std::size_t width() const noexcept { return width_; }
    std::uint64_t seed() const noexcept { return seed_; }
    const std::vector<double>& feature_means() const noexcept { return means_; }
    double mean_prediction() const noexcept { return mean_prediction_; }

    std::span<const double> row(std::size_t i) const { return {flat_.data() + i * width_, width_}; }

    double recompute_mean_prediction(const RegressorModel& model) const {
        const double first = predict(model, row(0));
        double s = 0.0;
        for (std::size_t i = 1; i < rows_.size(); ++i) s += predict(model, row(i)) - first;
        return first + s / static_cast<double>(rows_.size());
    }

private:
    std::vector<FeatureVector> rows_;
    std::vector<double> flat_;
    std::uint64_t seed_ = 0;
    std::size_t width_ = 0;
    std::vector<double> means_;
    double mean_prediction_ = 0.0;
};

/// Uniform sample without replacement of `size` rows, kept in source order.
inline BackgroundSet build_background(const RegressorModel& model, std::span<const FeatureVector> pool,
                                      std::size_t size, std::uint64_t seed) {
    if (size == 0) throw Error("background size must be positive");
    if (size > pool.size()) {
        throw Error("background size " + std::to_string(size) + " exceeds the " + std::to_string(pool.size()) +
                    " available training rows");
    }
    std::vector<std::size_t> idx(pool.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    detail::Rng rng(seed);
    for (std::size_t i = 0; i < size; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(size);
    std::sort(idx.begin(), idx.end());
    std::vector<FeatureVector> rows;
    rows.reserve(size);
    for (auto i : idx) rows.push_back(pool[i]);
    return BackgroundSet(model, std::move(rows), seed);
}

inline BackgroundSet build_background(const RegressorModel& model, const MessageDataset& train, std::size_t size,
                                      std::uint64_t seed) {
    std::vector<FeatureVector> pool;
    pool.reserve(train.size());
    for (const auto& msg : train.messages) pool.push_back(msg.features);
    return build_background(model, pool, size, seed);
}

/// Feature subset as a bitmask over canonical feature indices.
struct Coalition {
    std::uint32_t bits = 0;

    static Coalition full(std::size_t m) { return {m >= 32 ? ~0u : ((1u << m) - 1u)}; }
    static Coalition of(std::initializer_list<std::size_t> features) {
        Coalition c;
        for (auto f : features) c.bits |= 1u << f;
        return c;
    }
    bool contains(std::size_t m) const noexcept { return (bits >> m) & 1u; }
    Coalition with(std::size_t m) const noexcept { return {bits | (1u << m)}; }
    std::size_t size() const noexcept { return static_cast<std::size_t>(std::popcount(bits)); }
    bool operator==(const Coalition&) const = default;
};

namespace detail {

/// Mean prediction over the background of the composite (instance on S,
/// background row elsewhere). `scratch` must hold M doubles. Summed as
/// deviations from the first value so a constant model gives that constant.
inline double composite_mean(const RegressorModel& model, std::span<const double> instance, Coalition s,
                             const BackgroundSet& background, std::span<double> scratch) {
    const std::size_t m = instance.size();
    double first = 0.0;
    double total = 0.0;
    for (std::size_t b = 0; b < background.size(); ++b) {
        const auto row = background.row(b);
        for (std::size_t j = 0; j < m; ++j) scratch[j] = s.contains(j) ? instance[j] : row[j];
        const double v = predict(model, std::span<const double>(scratch.data(), m));
        if (b == 0) first = v;
        else total += v - first;
    }
    return first + total / static_cast<double>(background.size());
}

} // namespace detail

/// v(S): interventional expectation of the score with S fixed to the instance.
inline double coalition_value(const RegressorModel& model, const FeatureVector& instance, Coalition coalition,
                              const BackgroundSet& background) {
    const std::size_t m = instance.size();
    if (m != model.feature_count || m != background.width()) throw Error("feature dimension mismatch");
    if (m < 32 && (coalition.bits >> m) != 0) throw Error("coalition names a feature outside 0..M-1");
    if (coalition == Coalition::full(m)) return predict(model, instance);
    if (coalition.bits == 0) return background.mean_prediction();
    std::vector<double> scratch(m);
    return detail::composite_mean(model, instance.values(), coalition, background, scratch);
}

struct ShapleyExplanation {
    MessageId id = 0;
    double base_value = 0.0;
    std::vector<double> contributions;
    double prediction = 0.0;
    std::size_t coalition_evaluations = 0;

    double efficiency_gap() const {
        double s = base_value;
        for (double c : contributions) s += c;
        return s - prediction;
    }
};

/// Shapley weight s!(M-s-1)!/M! = 1 / (M * C(M-1, s)) for all s in 0..M-1.
inline std::vector<double> shapley_weights(std::size_t m) {
    std::vector<double> w(m);
    double binom = 1.0; // C(M-1, s)
    for (std::size_t s = 0; s < m; ++s) {
        w[s] = 1.0 / (static_cast<double>(m) * binom);
        binom = binom * static_cast<double>(m - 1 - s) / static_cast<double>(s + 1);
    }
    return w;
}

/// Exact attribution by enumerating all 2^M coalitions (M <= 16).
inline ShapleyExplanation shapley_exact(const RegressorModel& model, const FeatureVector& instance,
                                        const BackgroundSet& background, MessageId id = 0) {
    const std::size_t m = instance.size();
    if (m > kMaxExactFeatures) {
        throw Error("exact Shapley enumeration supports at most 16 features (got " + std::to_string(m) +
                    "); use the linear closed form or a smaller feature set");
    }
    if (m != model.feature_count || m != background.width()) throw Error("feature dimension mismatch");
    if (m == 0) throw Error("instance has no features");

    const std::uint32_t full = Coalition::full(m).bits;
    const std::size_t count = std::size_t{1} << m;
    std::vector<double> value(count);
    std::vector<double> scratch(m);
    for (std::uint32_t s = 0; s < count; ++s) {
        if (s == full) value[s] = predict(model, instance);
        else if (s == 0) value[s] = background.mean_prediction();
        else value[s] = detail::composite_mean(model, instance.values(), Coalition{s}, background, scratch);
    }

    const auto weight = shapley_weights(m);
    ShapleyExplanation out;
    out.id = id;
    out.base_value = value[0];
    out.prediction = value[full];
    out.coalition_evaluations = count;
    out.contributions.assign(m, 0.0);
    for (std::size_t f = 0; f < m; ++f) {
        const std::uint32_t bit = 1u << f;
        double phi = 0.0;
        for (std::uint32_t s = 0; s < count; ++s) {
            if (s & bit) continue;
            phi += weight[static_cast<std::size_t>(std::popcount(s))] * (value[s | bit] - value[s]);
        }
        out.contributions[f] = phi;
    }
    return out;
}

/// Closed form for linear models: contribution_m = w_m * (x_m - E[x_m]).
inline ShapleyExplanation shapley_linear(const RegressorModel& model, const FeatureVector& instance,
                                         const BackgroundSet& background, MessageId id = 0) {
    if (!model.is_linear()) throw Error("closed-form attribution requires a linear model");
    const std::size_t m = instance.size();
    if (m != model.feature_count || m != background.width()) throw Error("feature dimension mismatch");
    const auto w = model.raw_linear_weights();
    const auto& mean = background.feature_means();
    ShapleyExplanation out;
    out.id = id;
    out.base_value = w[0];
    out.contributions.resize(m);
    for (std::size_t j = 0; j < m; ++j) {
        out.base_value += w[j + 1] * mean[j];
        out.contributions[j] = w[j + 1] * instance[j] - w[j + 1] * mean[j];
    }
    out.prediction = predict(model, instance);
    return out;
}

/// Per-feature test w_m * x_m <= E[w_m * X_m] against given expected effects.
inline std::vector<bool> gate_check_expected(std::span<const double> weights, const FeatureVector& instance,
                                             std::span<const double> expected_effects) {
    if (weights.size() != instance.size() || expected_effects.size() != instance.size()) {
        throw Error("gate check: weights, instance and expectations must have length M");
    }
    std::vector<bool> mask(weights.size());
    for (std::size_t m = 0; m < weights.size(); ++m) mask[m] = weights[m] * instance[m] <= expected_effects[m];
    return mask;
}

/// Gate mask with E[w_m * X_m] = w_m * mean_m over the background.
/// `weights` are the M feature weights (no intercept).
inline std::vector<bool> gate_check(std::span<const double> weights, const FeatureVector& instance,
                                    const BackgroundSet& background) {
    if (weights.size() != background.width()) throw Error("gate check: weights must have length M");
    std::vector<double> expected(weights.size());
    for (std::size_t m = 0; m < weights.size(); ++m) expected[m] = weights[m] * background.feature_means()[m];
    return gate_check_expected(weights, instance, expected);
}

struct ShapMatrix {
    std::vector<std::string> feature_names;
    std::vector<MessageId> ids;
    std::vector<double> values; // row-major, rows() x cols()
    std::vector<double> base_values;
    std::vector<double> predictions;
    std::vector<std::size_t> suppressed;

    std::size_t rows() const noexcept { return ids.size(); }
    std::size_t cols() const noexcept { return feature_names.size(); }
    std::span<const double> row(std::size_t i) const { return {values.data() + i * cols(), cols()}; }

    double efficiency_gap(std::size_t i) const {
        double s = base_values[i];
        for (double v : row(i)) s += v;
        return s - predictions[i];
    }

    /// Mean absolute contribution per feature.
    std::vector<double> mean_abs() const {
        std::vector<double> out(cols(), 0.0);
        for (std::size_t i = 0; i < rows(); ++i) {
            for (std::size_t m = 0; m < cols(); ++m) out[m] += std::abs(values[i * cols() + m]);
        }
        if (rows() > 0) {
            for (auto& v : out) v /= static_cast<double>(rows());
        }
        return out;
    }

    void append(const ShapleyExplanation& e, std::size_t suppressed_count = 0) {
        if (e.contributions.size() != cols()) throw Error("explanation width does not match the matrix");
        ids.push_back(e.id);
        values.insert(values.end(), e.contributions.begin(), e.contributions.end());
        base_values.push_back(e.base_value);
        predictions.push_back(e.prediction);
        suppressed.push_back(suppressed_count);
    }
};

struct ExplainOptions {
    bool gate = false;              // record only contributions passing the gate
    bool linear_closed_form = true; // linear models skip enumeration
};

/// Explains one message, optionally applying the gate. Suppressed
/// contributions are stored as 0.
inline std::pair<ShapleyExplanation, std::size_t> explain_message(const RegressorModel& model,
                                                                  const FeatureVector& instance,
                                                                  const BackgroundSet& background,
                                                                  const ExplainOptions& options, MessageId id = 0) {
    auto e = (model.is_linear() && options.linear_closed_form) ? shapley_linear(model, instance, background, id)
                                                                : shapley_exact(model, instance, background, id);
    std::size_t suppressed = 0;
    if (options.gate) {
        std::vector<bool> mask;
        if (model.is_linear()) {
            const auto w = model.raw_linear_weights();
            mask = gate_check(std::span(w).subspan(1), instance, background);
        } else {
            // Non-linear models: the linear gate w_m x_m <= E[w_m X_m] is exactly
            // contribution_m <= 0, which is what is tested here.
            mask.resize(e.contributions.size());
            for (std::size_t m = 0; m < mask.size(); ++m) mask[m] = e.contributions[m] <= 0.0;
        }
        for (std::size_t m = 0; m < mask.size(); ++m) {
            if (!mask[m]) {
                e.contributions[m] = 0.0;
                ++suppressed;
            }
        }
    }
    return {std::move(e), suppressed};
}

/// One attribution row per message, in id order.
inline ShapMatrix explain_batch(const RegressorModel& model, const MessageDataset& dataset,
                                const BackgroundSet& background, const ExplainOptions& options = {}) {
    if (dataset.empty()) throw DataError("cannot explain an empty dataset");
    if (dataset.feature_count != model.feature_count) {
        throw DataError("dataset has " + std::to_string(dataset.feature_count) + " features, model expects " +
                        std::to_string(model.feature_count));
    }
    const std::size_t n = dataset.size();
    std::vector<std::pair<ShapleyExplanation, std::size_t>> rows(n);
    detail::parallel_for(n, [&](std::size_t i) {
        const auto& msg = dataset.messages[i];
        rows[i] = explain_message(model, msg.features, background, options, msg.id);
    });

    ShapMatrix out;
    out.feature_names = feature_names(model.schema_name);
    if (out.feature_names.size() != model.feature_count) {
        out.feature_names = feature_names("generic-" + std::to_string(model.feature_count));
    }
    for (const auto& [e, s] : rows) out.append(e, s);
    return out;
}

inline void write_shap_csv(std::ostream& out, const ShapMatrix& shap) {
    out << "id";
    for (const auto& name : shap.feature_names) out << ',' << name;
    out << ",base_value,prediction,suppressed_count\n";
    for (std::size_t i = 0; i < shap.rows(); ++i) {
        out << shap.ids[i];
        for (double v : shap.row(i)) out << ',' << detail::format_double(v);
        out << ',' << detail::format_double(shap.base_values[i]) << ',' << detail::format_double(shap.predictions[i])
            << ',' << shap.suppressed[i] << '\n';
    }
}

inline ShapMatrix read_shap_csv(std::istream& in, const std::string& source = "<stream>") {
    std::string line;
    std::size_t line_no = 0;
    auto next = [&]() {
        while (std::getline(in, line)) {
            ++line_no;
            if (!detail::trim(line).empty()) return true;
        }
        return false;
    };
    if (!next()) throw DataError(source + ": empty file");
    const auto header = detail::split_csv_line(line);
    if (header.size() < 5 || header.front() != "id" || header[header.size() - 3] != "base_value" ||
        header[header.size() - 2] != "prediction" || header.back() != "suppressed_count") {
        throw DataError(source + ": not a Shapley matrix (expected id,<features>,base_value,prediction,suppressed_count)");
    }
    ShapMatrix shap;
    shap.feature_names.assign(header.begin() + 1, header.end() - 3);
    const std::size_t width = header.size();
    while (next()) {
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != width) {
            throw DataError(source + ": line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                            " fields, expected " + std::to_string(width));
        }
        std::vector<double> nums(width);
        for (std::size_t c = 0; c < width; ++c) {
            auto v = detail::parse_double(cells[c]);
            if (!v || !std::isfinite(*v)) {
                throw DataError(source + ": unparseable value '" + cells[c] + "' at line " + std::to_string(line_no) +
                                ", column " + header[c]);
            }
            nums[c] = *v;
        }
        if (nums.front() < 0 || nums.back() < 0) throw DataError(source + ": negative id or count");
        shap.ids.push_back(static_cast<MessageId>(nums.front()));
        shap.values.insert(shap.values.end(), nums.begin() + 1, nums.end() - 3);
        shap.base_values.push_back(nums[width - 3]);
        shap.predictions.push_back(nums[width - 2]);
        shap.suppressed.push_back(static_cast<std::size_t>(nums.back()));
    }
    if (shap.rows() == 0) throw DataError(source + ": no data rows");
    return shap;
}

inline void export_shap_csv(const std::filesystem::path& path, const ShapMatrix& shap) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(path.string() + ": cannot open for writing");
    write_shap_csv(out, shap);
}

inline ShapMatrix load_shap_csv(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw DataError(path.string() + ": file not found");
    std::ifstream in(path, std::ios::binary);
    return read_shap_csv(in, path.string());
}

} // namespace gridxai
