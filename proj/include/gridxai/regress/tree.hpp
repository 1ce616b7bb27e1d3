#pragma once

// Regression trees grown by variance reduction.
//
// One builder serves every tree family: exhaustive CART split search,
// per-node feature subsampling (random forest) and single random threshold
// per feature (extremely randomized trees).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "gridxai/core_model.hpp"
#include "gridxai/detail/random.hpp"

namespace gridxai {

struct TreeNode {
    std::int32_t feature = -1; // -1 marks a leaf
    double threshold = 0.0;    // go left when x[feature] <= threshold
    std::int32_t left = -1;
    std::int32_t right = -1;
    double value = 0.0;        // mean target of the training rows reaching the node
    std::uint32_t samples = 0;

    bool is_leaf() const noexcept { return feature < 0; }
    bool operator==(const TreeNode&) const = default;
};

class RegressionTree {
public:
    RegressionTree() = default;
    explicit RegressionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

    double predict(std::span<const double> x) const {
        const TreeNode* node = nodes_.data();
        while (node->feature >= 0) {
            node = nodes_.data() + (x[static_cast<std::size_t>(node->feature)] <= node->threshold ? node->left
                                                                                                   : node->right);
        }
        return node->value;
    }

    const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
    std::size_t node_count() const noexcept { return nodes_.size(); }

    std::size_t depth() const {
        std::size_t best = 0;
        std::vector<std::pair<std::int32_t, std::size_t>> stack{{0, 0}};
        while (!stack.empty()) {
            auto [i, d] = stack.back();
            stack.pop_back();
            best = std::max(best, d);
            const auto& n = nodes_[static_cast<std::size_t>(i)];
            if (!n.is_leaf()) {
                stack.push_back({n.left, d + 1});
                stack.push_back({n.right, d + 1});
            }
        }
        return best;
    }

    /// True when some internal node tests feature m.
    bool uses_feature(std::size_t m) const {
        return std::any_of(nodes_.begin(), nodes_.end(),
                           [m](const TreeNode& n) { return n.feature == static_cast<std::int32_t>(m); });
    }

    bool operator==(const RegressionTree&) const = default;

private:
    std::vector<TreeNode> nodes_;
};

struct TreeParams {
    std::size_t max_depth = 0;        // 0 = grow until pure or min_samples_leaf binds
    std::size_t min_samples_leaf = 1;
    std::size_t max_features = 0;     // features examined per node, 0 = all
    bool random_thresholds = false;   // one uniform threshold per feature (extra-trees)
};

/// Column-major training matrix shared by all trees of an ensemble.
struct TrainingMatrix {
    std::vector<std::vector<double>> columns; // columns[m][row]
    std::size_t rows = 0;

    static TrainingMatrix from(const MessageDataset& ds) {
        TrainingMatrix t;
        t.rows = ds.size();
        t.columns.assign(ds.feature_count, std::vector<double>(ds.size()));
        for (std::size_t i = 0; i < ds.size(); ++i) {
            for (std::size_t m = 0; m < ds.feature_count; ++m) t.columns[m][i] = ds.messages[i].features[m];
        }
        return t;
    }

    std::size_t features() const noexcept { return columns.size(); }
};

struct SplitCandidate {
    std::size_t feature = 0;
    double threshold = 0.0;
    double score = -std::numeric_limits<double>::infinity(); // sumL^2/nL + sumR^2/nR
};

namespace detail {

/// Best exhaustive split of `rows` on one feature. Candidate thresholds are
/// midpoints between consecutive distinct sorted values; the first strictly
/// best threshold (ascending) wins.
inline std::optional<SplitCandidate> best_split_on_feature(const std::vector<double>& column,
                                                           std::span<const double> target,
                                                           std::vector<std::size_t>& rows, std::size_t feature,
                                                           std::size_t min_leaf, double total) {
    std::sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) {
        return column[a] < column[b] || (column[a] == column[b] && a < b);
    });
    const std::size_t n = rows.size();
    std::optional<SplitCandidate> best;
    double left_sum = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        left_sum += target[rows[i]];
        const double lo = column[rows[i]];
        const double hi = column[rows[i + 1]];
        if (!(lo < hi)) continue;
        const std::size_t n_left = i + 1;
        const std::size_t n_right = n - n_left;
        if (n_left < min_leaf || n_right < min_leaf) continue;
        const double right_sum = total - left_sum;
        const double score = left_sum * left_sum / static_cast<double>(n_left) +
                             right_sum * right_sum / static_cast<double>(n_right);
        if (!best || score > best->score) {
            double threshold = lo + (hi - lo) / 2.0;
            if (!(threshold < hi)) threshold = lo;
            best = SplitCandidate{feature, threshold, score};
        }
    }
    return best;
}

/// Score of a fixed threshold (extra-trees); nullopt when a side violates min_leaf.
inline std::optional<SplitCandidate> score_threshold(const std::vector<double>& column, std::span<const double> target,
                                                     std::span<const std::size_t> rows, std::size_t feature,
                                                     double threshold, std::size_t min_leaf, double total) {
    double left_sum = 0.0;
    std::size_t n_left = 0;
    for (auto r : rows) {
        if (column[r] <= threshold) {
            left_sum += target[r];
            ++n_left;
        }
    }
    const std::size_t n_right = rows.size() - n_left;
    if (n_left < min_leaf || n_right < min_leaf || n_left == 0 || n_right == 0) return std::nullopt;
    const double right_sum = total - left_sum;
    return SplitCandidate{feature, threshold,
                          left_sum * left_sum / static_cast<double>(n_left) +
                              right_sum * right_sum / static_cast<double>(n_right)};
}

class TreeBuilder {
public:
    TreeBuilder(const TrainingMatrix& x, std::span<const double> y, const TreeParams& params, detail::Rng* rng)
        : x_(x), y_(y), params_(params), rng_(rng) {
        feature_order_.resize(x.features());
        std::iota(feature_order_.begin(), feature_order_.end(), std::size_t{0});
    }

    RegressionTree build(std::vector<std::size_t> rows) {
        nodes_.clear();
        grow(std::move(rows), 0);
        return RegressionTree(std::move(nodes_));
    }

private:
    std::int32_t grow(std::vector<std::size_t> rows, std::size_t depth) {
        const auto index = static_cast<std::int32_t>(nodes_.size());
        nodes_.push_back({});

        double total = 0.0;
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (auto r : rows) {
            total += y_[r];
            lo = std::min(lo, y_[r]);
            hi = std::max(hi, y_[r]);
        }
        const auto n = rows.size();
        {
            auto& node = nodes_[static_cast<std::size_t>(index)];
            node.value = total / static_cast<double>(n);
            node.samples = static_cast<std::uint32_t>(n);
        }

        const bool depth_exhausted = params_.max_depth != 0 && depth >= params_.max_depth;
        if (depth_exhausted || lo == hi || n < 2 * params_.min_samples_leaf) return index;

        auto split = find_split(rows, total);
        if (!split || !(split->score > total * total / static_cast<double>(n))) return index;

        std::vector<std::size_t> left_rows;
        std::vector<std::size_t> right_rows;
        const auto& column = x_.columns[split->feature];
        for (auto r : rows) (column[r] <= split->threshold ? left_rows : right_rows).push_back(r);
        if (left_rows.empty() || right_rows.empty()) return index;
        rows.clear();
        rows.shrink_to_fit();

        const auto left = grow(std::move(left_rows), depth + 1);
        const auto right = grow(std::move(right_rows), depth + 1);
        auto& node = nodes_[static_cast<std::size_t>(index)];
        node.feature = static_cast<std::int32_t>(split->feature);
        node.threshold = split->threshold;
        node.left = left;
        node.right = right;
        return index;
    }

    std::optional<SplitCandidate> find_split(std::vector<std::size_t>& rows, double total) {
        const std::size_t m = x_.features();
        const std::size_t budget = params_.max_features == 0 ? m : std::min(params_.max_features, m);
        if (rng_ && budget < m) rng_->shuffle(std::span(feature_order_));

        std::optional<SplitCandidate> best;
        std::size_t examined = 0;
        for (std::size_t k = 0; k < m && examined < budget; ++k) {
            const std::size_t f = (rng_ && budget < m) ? feature_order_[k] : k;
            const auto& column = x_.columns[f];
            double fmin = std::numeric_limits<double>::infinity();
            double fmax = -fmin;
            for (auto r : rows) {
                fmin = std::min(fmin, column[r]);
                fmax = std::max(fmax, column[r]);
            }
            if (!(fmin < fmax)) continue; // constant features do not use up the budget
            ++examined;

            std::optional<SplitCandidate> candidate;
            if (params_.random_thresholds) {
                double t = rng_ ? rng_->uniform(fmin, fmax) : fmin + (fmax - fmin) / 2.0;
                if (!(t < fmax)) t = fmin;
                candidate = score_threshold(column, y_, rows, f, t, params_.min_samples_leaf, total);
            } else {
                candidate = best_split_on_feature(column, y_, rows, f, params_.min_samples_leaf, total);
            }
            if (candidate && (!best || candidate->score > best->score)) best = candidate;
        }
        return best;
    }

    const TrainingMatrix& x_;
    std::span<const double> y_;
    TreeParams params_;
    detail::Rng* rng_;
    std::vector<std::size_t> feature_order_;
    std::vector<TreeNode> nodes_;
};

} // namespace detail

/// Grows one tree on the given row multiset (duplicates allowed for bootstrap).
/// `rng` drives feature subsampling and random thresholds; it may be null when
/// neither is requested.
inline RegressionTree grow_tree(const TrainingMatrix& x, std::span<const double> y, std::vector<std::size_t> rows,
                                const TreeParams& params, detail::Rng* rng = nullptr) {
    if (rows.empty()) throw Error("cannot grow a tree on zero rows");
    if (params.min_samples_leaf == 0) throw Error("min_samples_leaf must be positive");
    detail::TreeBuilder builder(x, y, params, rng);
    return builder.build(std::move(rows));
}

inline RegressionTree grow_tree(const TrainingMatrix& x, std::span<const double> y, const TreeParams& params,
                                detail::Rng* rng = nullptr) {
    std::vector<std::size_t> rows(x.rows);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return grow_tree(x, y, std::move(rows), params, rng);
}

} // namespace gridxai
