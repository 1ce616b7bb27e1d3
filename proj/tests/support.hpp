#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gridxai/cli.hpp"
#include "gridxai/gridxai.hpp"

namespace testing_support {

inline gridxai::MessageDataset make_dataset(const std::vector<std::vector<double>>& rows,
                                            const std::vector<int>& labels,
                                            std::string schema = "") {
    gridxai::MessageDataset ds;
    ds.feature_count = rows.empty() ? 0 : rows.front().size();
    ds.schema_name = schema.empty() ? "generic-" + std::to_string(ds.feature_count) : schema;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        ds.messages.push_back({static_cast<gridxai::MessageId>(i), gridxai::FeatureVector(rows[i]), labels[i], {}});
    }
    return ds;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("gridxai_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Linear model with the given intercept-first weights over generic features.
inline gridxai::RegressorModel linear_model(std::vector<double> weights) {
    gridxai::RegressorModel m;
    m.spec = gridxai::ModelSpec::defaults(gridxai::ModelKind::Linear);
    m.feature_count = weights.size() - 1;
    m.schema_name = "generic-" + std::to_string(m.feature_count);
    m.fit = gridxai::LinearFit{std::move(weights)};
    return m;
}

} // namespace testing_support
