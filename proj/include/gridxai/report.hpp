#pragma once

// JSON report payloads. Key order is fixed so identical runs produce
// byte-identical files.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "gridxai/regress/metrics.hpp"
#include "gridxai/severity.hpp"

namespace gridxai {

using Json = nlohmann::ordered_json;

inline Json to_json(const EvalMetrics& e) {
    return Json{{"tn", e.tn},
                {"fp", e.fp},
                {"fn", e.fn},
                {"tp", e.tp},
                {"tn_rate", e.tn_rate},
                {"fp_rate", e.fp_rate},
                {"fn_rate", e.fn_rate},
                {"tp_rate", e.tp_rate},
                {"r2", e.r2},
                {"mse", e.mse},
                {"mae", e.mae},
                {"overestimates", e.overestimates}};
}

inline Json to_json(const Dendrogram& tree) {
    Json merges = Json::array();
    for (const auto& m : tree.merges) merges.push_back(Json::array({m.left, m.right, m.cost, m.size}));
    return Json{{"leaves", tree.leaves}, {"linkage", std::string(to_string(tree.linkage))}, {"merges", merges}};
}

/// Compact summary of a dendrogram: size, top costs.
inline Json dendrogram_digest(const Dendrogram& tree, std::size_t top = 5) {
    Json costs = Json::array();
    const std::size_t m = tree.merges.size();
    for (std::size_t i = 0; i < std::min(top, m); ++i) costs.push_back(tree.merges[m - 1 - i].cost);
    return Json{{"leaves", tree.leaves},
                {"merges", m},
                {"final_cost", m ? tree.merges.back().cost : 0.0},
                {"top_costs", costs}};
}

inline Json to_json(const SeverityReport& r, bool include_heatmap = true) {
    Json clusters = Json::array();
    for (std::size_t rank = 0; rank < r.clusters.size(); ++rank) {
        const auto& c = r.clusters[rank];
        clusters.push_back(Json{{"rank", rank},
                                {"label", c.label},
                                {"size", c.members.size()},
                                {"node", c.node},
                                {"formation_cost", c.formation_cost},
                                {"ess", c.ess},
                                {"dispersion", c.dispersion},
                                {"mean_abs_profile", c.mean_abs_profile},
                                {"centroid", c.centroid},
                                {"members", c.members}});
    }
    Json out{{"k", r.k},
             {"linkage", std::string(to_string(r.linkage))},
             {"feature_names", r.feature_names},
             {"undone_merge_costs", r.undone_merge_costs},
             {"clusters", clusters}};
    if (include_heatmap) {
        out["heatmap"] = Json{{"ids", r.heatmap_ids}, {"rows", r.heatmap}};
    }
    return out;
}

inline void write_json(const std::filesystem::path& path, const Json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(path.string() + ": cannot open for writing");
    out << j.dump(2) << '\n';
    if (!out) throw DataError(path.string() + ": write failed");
}

/// FNV-1a digest of a file, for reproducibility echoes.
inline std::string file_digest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 14];
    while (in) {
        in.read(buf, sizeof buf);
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = hex[h & 0xF];
        h >>= 4;
    }
    return "fnv1a64:" + s;
}

} // namespace gridxai
