#pragma once

// Attack-risk severity by agglomerative clustering of attribution rows.
//
// Ward linkage merges the pair with the smallest increase in within-cluster
// sum of squares,
//     g(A, B) = |A||B| / (|A| + |B|) * ||mu_A - mu_B||^2
//             = ESS(A u B) - ESS(A) - ESS(B).
// Complete linkage (maximum pairwise Euclidean distance) is also available.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gridxai/core_model.hpp"
#include "gridxai/detail/text.hpp"
#include "gridxai/explain.hpp"

namespace gridxai {

enum class Linkage : std::uint8_t { Ward, Complete };

inline std::string_view to_string(Linkage l) { return l == Linkage::Ward ? "ward" : "complete"; }

inline Linkage linkage_from_string(std::string_view name) {
    if (name == "ward") return Linkage::Ward;
    if (name == "complete") return Linkage::Complete;
    throw Error("unknown linkage '" + std::string(name) + "'");
}

/// Row-major point set, n x dim.
struct PointSet {
    std::size_t dim = 0;
    std::vector<double> data;

    std::size_t size() const noexcept { return dim == 0 ? 0 : data.size() / dim; }
    std::span<const double> point(std::size_t i) const { return {data.data() + i * dim, dim}; }

    static PointSet from(const ShapMatrix& shap) { return {shap.cols(), shap.values}; }
    static PointSet from_rows(const std::vector<std::vector<double>>& rows) {
        PointSet p;
        if (!rows.empty()) p.dim = rows.front().size();
        for (const auto& r : rows) {
            if (r.size() != p.dim) throw Error("points differ in dimension");
            p.data.insert(p.data.end(), r.begin(), r.end());
        }
        return p;
    }
};

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

struct ClusterStats {
    std::vector<std::size_t> members;
    std::vector<double> centroid;
    double ess = 0.0;

    std::size_t size() const noexcept { return members.size(); }

    static ClusterStats singleton(std::size_t id, std::span<const double> point) {
        return {{id}, std::vector<double>(point.begin(), point.end()), 0.0};
    }

    /// Centroid and ESS recomputed from the member points.
    static ClusterStats from_members(const PointSet& points, std::vector<std::size_t> members) {
        if (members.empty()) throw Error("cluster must have at least one member");
        ClusterStats c;
        c.members = std::move(members);
        c.centroid.assign(points.dim, 0.0);
        for (auto i : c.members) {
            const auto p = points.point(i);
            for (std::size_t d = 0; d < points.dim; ++d) c.centroid[d] += p[d];
        }
        for (auto& v : c.centroid) v /= static_cast<double>(c.members.size());
        for (auto i : c.members) c.ess += squared_distance(points.point(i), c.centroid);
        return c;
    }
};

/// Ward merge cost of two disjoint clusters.
inline double ward_merge_cost(std::size_t size_a, std::span<const double> centroid_a, std::size_t size_b,
                              std::span<const double> centroid_b) {
    if (centroid_a.size() != centroid_b.size()) throw Error("ward_merge_cost: dimension mismatch");
    const auto na = static_cast<double>(size_a);
    const auto nb = static_cast<double>(size_b);
    return na * nb / (na + nb) * squared_distance(centroid_a, centroid_b);
}

inline double ward_merge_cost(const ClusterStats& a, const ClusterStats& b) {
    return ward_merge_cost(a.size(), a.centroid, b.size(), b.centroid);
}

/// Merged statistics of two disjoint clusters, updated from sizes and centroids.
inline ClusterStats merge_stats(const ClusterStats& a, const ClusterStats& b) {
    ClusterStats c;
    c.members = a.members;
    c.members.insert(c.members.end(), b.members.begin(), b.members.end());
    const auto na = static_cast<double>(a.size());
    const auto nb = static_cast<double>(b.size());
    c.centroid.resize(a.centroid.size());
    for (std::size_t d = 0; d < c.centroid.size(); ++d) {
        c.centroid[d] = (na * a.centroid[d] + nb * b.centroid[d]) / (na + nb);
    }
    c.ess = a.ess + b.ess + ward_merge_cost(a, b);
    return c;
}

struct Merge {
    std::size_t left = 0;  // smaller node id
    std::size_t right = 0;
    double cost = 0.0;
    std::size_t size = 0;

    bool operator==(const Merge&) const = default;
};

/// Binary merge tree. Leaves are 0..n-1; merge i creates node n+i.
struct Dendrogram {
    std::size_t leaves = 0;
    Linkage linkage = Linkage::Ward;
    std::vector<Merge> merges;

    /// Cost at which each node was formed (0 for leaves).
    std::vector<double> node_costs() const {
        std::vector<double> c(leaves + merges.size(), 0.0);
        for (std::size_t i = 0; i < merges.size(); ++i) c[leaves + i] = merges[i].cost;
        return c;
    }
};

namespace detail {

inline void check_points(const PointSet& points) {
    if (points.dim == 0 || points.size() < 2) throw Error("agglomerate needs at least 2 points");
    if (points.data.size() % points.dim != 0) throw Error("point data is not a whole number of rows");
    for (double v : points.data) {
        if (!std::isfinite(v)) throw DataError("agglomerate: non-finite coordinate (NaN row)");
    }
}

} // namespace detail

/// Greedy agglomeration. Each step merges the active pair with the smallest
/// linkage cost; ties go to the lexicographically smallest (left id, right id).
///
/// Every active cluster caches its best partner among clusters with a larger
/// node id. A merged cluster always receives the largest id so far, so only
/// caches pointing at the two merged clusters need a full rescan.
inline Dendrogram agglomerate(const PointSet& points, Linkage linkage = Linkage::Ward) {
    detail::check_points(points);
    const std::size_t n = points.size();
    const std::size_t dim = points.dim;

    // Slot s holds one active cluster.
    std::vector<std::size_t> node_id(n);
    std::vector<std::size_t> size(n, 1);
    std::vector<double> centroid(points.data);
    std::vector<bool> active(n, true);
    std::iota(node_id.begin(), node_id.end(), std::size_t{0});

    std::vector<double> dist; // complete linkage: max pairwise distance between slots
    if (linkage == Linkage::Complete) {
        dist.assign(n * n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                const double d = std::sqrt(squared_distance(points.point(i), points.point(j)));
                dist[i * n + j] = dist[j * n + i] = d;
            }
        }
    }

    auto cost = [&](std::size_t a, std::size_t b) {
        if (linkage == Linkage::Complete) return dist[a * n + b];
        return ward_merge_cost(size[a], std::span<const double>(centroid.data() + a * dim, dim), size[b],
                               std::span<const double>(centroid.data() + b * dim, dim));
    };

    constexpr double kInf = std::numeric_limits<double>::infinity();
    constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> best(n, kNone);
    std::vector<double> best_cost(n, kInf);

    auto rescan = [&](std::size_t s) {
        best[s] = kNone;
        best_cost[s] = kInf;
        for (std::size_t t = 0; t < n; ++t) {
            if (!active[t] || t == s || node_id[t] < node_id[s]) continue;
            const double c = cost(s, t);
            if (best[s] == kNone || c < best_cost[s] || (c == best_cost[s] && node_id[t] < node_id[best[s]])) {
                best[s] = t;
                best_cost[s] = c;
            }
        }
    };
    for (std::size_t s = 0; s < n; ++s) rescan(s);

    Dendrogram tree;
    tree.leaves = n;
    tree.linkage = linkage;
    tree.merges.reserve(n - 1);

    for (std::size_t step = 0; step + 1 < n; ++step) {
        // Global minimum by (cost, smaller id, larger id).
        std::size_t a = kNone;
        for (std::size_t s = 0; s < n; ++s) {
            if (!active[s] || best[s] == kNone) continue;
            if (a == kNone || best_cost[s] < best_cost[a] ||
                (best_cost[s] == best_cost[a] &&
                 (node_id[s] < node_id[a] || (node_id[s] == node_id[a] && node_id[best[s]] < node_id[best[a]])))) {
                a = s;
            }
        }
        const std::size_t b = best[a];
        const double merge_cost = best_cost[a];
        tree.merges.push_back({node_id[a], node_id[b], merge_cost, size[a] + size[b]});

        // Merged cluster lives in slot a; slot b retires.
        if (linkage == Linkage::Complete) {
            for (std::size_t t = 0; t < n; ++t) {
                if (!active[t] || t == a || t == b) continue;
                const double d = std::max(dist[a * n + t], dist[b * n + t]);
                dist[a * n + t] = dist[t * n + a] = d;
            }
        }
        const auto na = static_cast<double>(size[a]);
        const auto nb = static_cast<double>(size[b]);
        for (std::size_t d = 0; d < dim; ++d) {
            centroid[a * dim + d] = (na * centroid[a * dim + d] + nb * centroid[b * dim + d]) / (na + nb);
        }
        size[a] += size[b];
        active[b] = false;
        node_id[a] = n + step;
        best[a] = kNone; // largest id: no partners with larger ids
        best_cost[a] = kInf;

        for (std::size_t s = 0; s < n; ++s) {
            if (!active[s] || s == a) continue;
            if (best[s] == a || best[s] == b) {
                rescan(s);
                continue;
            }
            const double c = cost(s, a);
            if (best[s] == kNone || c < best_cost[s]) {
                best[s] = a;
                best_cost[s] = c;
            }
        }
    }
    return tree;
}

inline Dendrogram agglomerate(const ShapMatrix& shap, Linkage linkage = Linkage::Ward) {
    return agglomerate(PointSet::from(shap), linkage);
}

namespace detail {

struct DisjointSets {
    std::vector<std::size_t> parent;
    explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), std::size_t{0}); }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
};

/// Node id of the cluster containing each leaf after applying the first
/// n - k merges.
inline std::vector<std::size_t> cluster_roots(const Dendrogram& tree, std::size_t k) {
    const std::size_t n = tree.leaves;
    const std::size_t total = n + tree.merges.size();
    std::vector<std::size_t> parent(total);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    for (std::size_t i = 0; i < n - k; ++i) {
        parent[tree.merges[i].left] = n + i;
        parent[tree.merges[i].right] = n + i;
    }
    std::vector<std::size_t> root(n);
    for (std::size_t leaf = 0; leaf < n; ++leaf) {
        std::size_t x = leaf;
        while (parent[x] != x) x = parent[x];
        root[leaf] = x;
    }
    return root;
}

} // namespace detail

/// Flat clustering into k groups by undoing the last k-1 merges. Labels are
/// 0..k-1 in order of each cluster's smallest member.
inline std::vector<std::size_t> cut(const Dendrogram& tree, std::size_t k) {
    const std::size_t n = tree.leaves;
    if (k < 1 || k > n) throw Error("cut: k must lie in [1, " + std::to_string(n) + "]");
    if (tree.merges.size() + 1 != n) throw Error("cut: dendrogram is incomplete");
    const auto root = detail::cluster_roots(tree, k);
    constexpr std::size_t kUnset = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> label_of_root(n + tree.merges.size(), kUnset);
    std::vector<std::size_t> labels(n);
    std::size_t next = 0;
    for (std::size_t leaf = 0; leaf < n; ++leaf) {
        auto& l = label_of_root[root[leaf]];
        if (l == kUnset) l = next++;
        labels[leaf] = l;
    }
    return labels;
}

struct ClusterRisk {
    std::size_t label = 0;
    std::vector<MessageId> members;  // message ids
    std::size_t node = 0;            // dendrogram node of the cluster
    double formation_cost = 0.0;     // cost of the merge that formed the node; 0 for singletons
    double ess = 0.0;
    double dispersion = 0.0;         // ess / size
    std::vector<double> centroid;
    std::vector<double> mean_abs_profile;
};

struct SeverityReport {
    std::size_t k = 0;
    Linkage linkage = Linkage::Ward;
    std::vector<std::string> feature_names;
    std::vector<ClusterRisk> clusters;    // ranked by formation cost, highest first
    std::vector<double> undone_merge_costs; // costs of the last k-1 merges
    std::vector<std::size_t> heatmap_row_order; // matrix rows grouped by ranked cluster
    std::vector<MessageId> heatmap_ids;
    std::vector<std::vector<double>> heatmap; // attribution rows in heatmap order
};

/// Per-cluster risk summary of a k-cut over the attribution rows.
inline SeverityReport risk_report(const ShapMatrix& shap, const Dendrogram& tree, std::size_t k) {
    if (tree.leaves != shap.rows()) {
        throw Error("risk_report: dendrogram has " + std::to_string(tree.leaves) + " leaves for " +
                    std::to_string(shap.rows()) + " attribution rows");
    }
    const auto labels = cut(tree, k);
    const auto roots = detail::cluster_roots(tree, k);
    const auto costs = tree.node_costs();
    const auto points = PointSet::from(shap);

    SeverityReport report;
    report.k = k;
    report.linkage = tree.linkage;
    report.feature_names = shap.feature_names;
    std::vector<std::vector<std::size_t>> rows_of(k);
    std::vector<std::size_t> node_of(k);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        rows_of[labels[i]].push_back(i);
        node_of[labels[i]] = roots[i];
    }
    for (std::size_t c = 0; c < k; ++c) {
        auto stats = ClusterStats::from_members(points, rows_of[c]);
        ClusterRisk risk;
        risk.label = c;
        for (auto r : rows_of[c]) risk.members.push_back(shap.ids[r]);
        risk.node = node_of[c];
        risk.formation_cost = costs[node_of[c]];
        risk.ess = stats.ess;
        risk.dispersion = stats.ess / static_cast<double>(stats.size());
        risk.centroid = stats.centroid;
        risk.mean_abs_profile.assign(shap.cols(), 0.0);
        for (auto r : rows_of[c]) {
            const auto row = shap.row(r);
            for (std::size_t m = 0; m < row.size(); ++m) risk.mean_abs_profile[m] += std::abs(row[m]);
        }
        for (auto& v : risk.mean_abs_profile) v /= static_cast<double>(rows_of[c].size());
        report.clusters.push_back(std::move(risk));
    }
    std::stable_sort(report.clusters.begin(), report.clusters.end(), [](const ClusterRisk& a, const ClusterRisk& b) {
        return a.formation_cost > b.formation_cost;
    });
    for (std::size_t i = tree.merges.size() - (k - 1); i < tree.merges.size(); ++i) {
        report.undone_merge_costs.push_back(tree.merges[i].cost);
    }
    for (const auto& c : report.clusters) {
        for (auto r : rows_of[c.label]) {
            report.heatmap_row_order.push_back(r);
            report.heatmap_ids.push_back(shap.ids[r]);
            const auto row = shap.row(r);
            report.heatmap.emplace_back(row.begin(), row.end());
        }
    }
    return report;
}

/// Standard four-column linkage layout: left,right,cost,size.
inline void write_linkage_csv(std::ostream& out, const Dendrogram& tree) {
    out << "left,right,cost,size\n";
    for (const auto& m : tree.merges) {
        out << m.left << ',' << m.right << ',' << detail::format_double(m.cost) << ',' << m.size << '\n';
    }
}

} // namespace gridxai
