#pragma once

// Dataset ingestion: CSV flow records, deterministic synthetic traffic,
// train/test splitting and train-statistics standardization.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gridxai/core_model.hpp"
#include "gridxai/detail/random.hpp"
#include "gridxai/detail/text.hpp"

namespace gridxai {

/// Maps CSV columns onto feature slots.
struct SchemaMap {
    std::string schema_name = std::string(kWustlSchema);
    std::vector<std::string> feature_columns; // feature slot i <- column feature_columns[i]
    std::string label_column = "Target";
    std::optional<std::string> kind_column;
    char delimiter = ',';
    bool has_header = true;

    /// Column layout of the WUSTL-IIoT-2018 flow export.
    static SchemaMap wustl() {
        SchemaMap s;
        s.feature_columns = {"Sport", "TotPkts", "TotBytes", "SrcPkts", "DstPkts", "SrcBytes"};
        return s;
    }

    /// WUSTL layout plus the attack-kind column written by export_csv.
    static SchemaMap wustl_with_kind() {
        auto s = wustl();
        s.kind_column = "AttackKind";
        return s;
    }

    void check() const {
        if (feature_columns.empty()) throw Error("schema maps no feature columns");
        auto sorted = feature_columns;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
            throw Error("schema maps a column to more than one feature slot");
        }
        if (std::binary_search(sorted.begin(), sorted.end(), label_column)) {
            throw Error("label column '" + label_column + "' is also a feature column");
        }
        if (kind_column && (*kind_column == label_column ||
                            std::binary_search(sorted.begin(), sorted.end(), *kind_column))) {
            throw Error("kind column collides with another mapped column");
        }
    }
};

namespace detail {

inline int parse_label(std::string_view cell) {
    if (auto v = parse_double(cell)) {
        if (*v == 0.0) return 0;
        if (*v == 1.0) return 1;
    }
    return -1;
}

} // namespace detail

/// Parses CSV text. `source` names the input in error messages.
inline MessageDataset parse_csv(std::istream& in, const SchemaMap& schema, std::size_t slot_size = 100,
                                const std::string& source = "<stream>") {
    schema.check();
    if (slot_size == 0) throw Error("slot size must be positive");

    const std::size_t m = schema.feature_columns.size();
    std::vector<std::size_t> feature_pos(m);
    std::size_t label_pos = m;
    std::optional<std::size_t> kind_pos;

    std::string line;
    std::size_t line_no = 0;
    auto next_line = [&]() -> bool {
        while (std::getline(in, line)) {
            ++line_no;
            if (!detail::trim(line).empty()) return true;
        }
        return false;
    };

    if (schema.has_header) {
        if (!next_line()) throw DataError(source + ": empty file");
        if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
        const auto header = detail::split_csv_line(line, schema.delimiter);
        auto find = [&](const std::string& name) -> std::optional<std::size_t> {
            auto it = std::find(header.begin(), header.end(), name);
            if (it == header.end()) return std::nullopt;
            return static_cast<std::size_t>(it - header.begin());
        };
        for (std::size_t i = 0; i < m; ++i) {
            auto pos = find(schema.feature_columns[i]);
            if (!pos) throw DataError(source + ": missing column " + schema.feature_columns[i]);
            feature_pos[i] = *pos;
        }
        auto lpos = find(schema.label_column);
        if (!lpos) throw DataError(source + ": missing column " + schema.label_column);
        label_pos = *lpos;
        if (schema.kind_column) {
            kind_pos = find(*schema.kind_column);
            if (!kind_pos) throw DataError(source + ": missing column " + *schema.kind_column);
        }
    } else {
        std::iota(feature_pos.begin(), feature_pos.end(), std::size_t{0});
        label_pos = m;
        if (schema.kind_column) kind_pos = m + 1;
    }

    const std::size_t needed = std::max(label_pos, kind_pos.value_or(0)) + 1;
    std::size_t needed_all = needed;
    for (auto p : feature_pos) needed_all = std::max(needed_all, p + 1);

    MessageDataset ds;
    ds.feature_count = m;
    ds.slot_size = slot_size;
    ds.schema_name = schema.schema_name;

    auto column_name = [&](std::size_t slot) { return schema.feature_columns[slot]; };

    while (next_line()) {
        const std::size_t row = ds.messages.size() + 1;
        const auto cells = detail::split_csv_line(line, schema.delimiter);
        if (cells.size() < needed_all) {
            throw DataError(source + ": row " + std::to_string(row) + " (line " + std::to_string(line_no) +
                            ") has " + std::to_string(cells.size()) + " fields, expected at least " +
                            std::to_string(needed_all));
        }
        std::vector<double> values(m);
        for (std::size_t i = 0; i < m; ++i) {
            auto v = detail::parse_double(cells[feature_pos[i]]);
            if (!v || !std::isfinite(*v)) {
                throw DataError(source + ": unparseable value '" + cells[feature_pos[i]] + "' at row " +
                                std::to_string(row) + ", column " + column_name(i) + " (line " +
                                std::to_string(line_no) + ")");
            }
            values[i] = *v;
        }
        LabeledMessage msg;
        msg.id = ds.messages.size();
        msg.features = FeatureVector(std::move(values));
        msg.label = detail::parse_label(cells[label_pos]);
        if (msg.label < 0) {
            throw DataError(source + ": label '" + cells[label_pos] + "' at row " + std::to_string(row) +
                            ", column " + schema.label_column + " is not 0 or 1");
        }
        if (kind_pos) {
            msg.kind = attack_kind_from_string(cells[*kind_pos]);
        }
        ds.messages.push_back(std::move(msg));
    }
    if (ds.messages.empty()) throw DataError(source + ": no data rows");
    require_valid(ds);
    return ds;
}

inline MessageDataset load_csv(const std::filesystem::path& path, const SchemaMap& schema = SchemaMap::wustl(),
                               std::size_t slot_size = 100) {
    if (!std::filesystem::exists(path)) throw DataError(path.string() + ": file not found");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(path.string() + ": cannot open file");
    return parse_csv(in, schema, slot_size, path.string());
}

/// Writes the dataset with the schema's header. Attack kinds are written
/// only when the schema maps a kind column.
inline void write_csv(std::ostream& out, const MessageDataset& dataset, const SchemaMap& schema = SchemaMap::wustl()) {
    schema.check();
    if (schema.feature_columns.size() != dataset.feature_count) {
        throw Error("schema maps " + std::to_string(schema.feature_columns.size()) + " features, dataset has " +
                    std::to_string(dataset.feature_count));
    }
    const char d = schema.delimiter;
    if (schema.has_header) {
        for (const auto& c : schema.feature_columns) out << c << d;
        out << schema.label_column;
        if (schema.kind_column) out << d << *schema.kind_column;
        out << '\n';
    }
    for (const auto& msg : dataset.messages) {
        for (double v : msg.features.values()) out << detail::format_double(v) << d;
        out << msg.label;
        if (schema.kind_column) {
            if (!msg.kind) throw Error("message " + std::to_string(msg.id) + " has no attack kind to export");
            out << d << to_string(*msg.kind);
        }
        out << '\n';
    }
}

inline void export_csv(const std::filesystem::path& path, const MessageDataset& dataset,
                       const SchemaMap& schema = SchemaMap::wustl()) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(path.string() + ": cannot open for writing");
    write_csv(out, dataset, schema);
    if (!out) throw DataError(path.string() + ": write failed");
}

// --- splitting --------------------------------------------------------------

struct SplitResult {
    MessageDataset train;
    MessageDataset test;
    std::vector<MessageId> train_source_ids; // input id of each train row
    std::vector<MessageId> test_source_ids;
    std::uint64_t seed = 0;
    double train_fraction = 0.7;
};

namespace detail {

inline MessageDataset subset(const MessageDataset& ds, const std::vector<MessageId>& ids) {
    MessageDataset out;
    out.feature_count = ds.feature_count;
    out.slot_size = ds.slot_size;
    out.schema_name = ds.schema_name;
    out.messages.reserve(ids.size());
    for (auto id : ids) out.messages.push_back(ds.messages[id]);
    renumber(out);
    return out;
}

} // namespace detail

/// Seeded shuffle then prefix split. Each side keeps input order and is
/// renumbered densely; the source ids record the mapping back.
inline SplitResult split_dataset(const MessageDataset& dataset, double train_fraction, std::uint64_t seed,
                                 bool stratified = false) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw Error("train fraction must lie in (0, 1)");
    }
    const std::size_t n = dataset.size();
    if (n < 2) throw Error("need at least 2 messages to split");
    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));

    detail::Rng rng(seed);
    std::vector<MessageId> train_ids;
    std::vector<MessageId> test_ids;

    if (!stratified) {
        std::vector<MessageId> order(n);
        std::iota(order.begin(), order.end(), MessageId{0});
        rng.shuffle(std::span(order));
        train_ids.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
        test_ids.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    } else {
        std::array<std::vector<MessageId>, 2> by_label;
        for (const auto& msg : dataset.messages) by_label[msg.label == 1 ? 1 : 0].push_back(msg.id);
        const auto pos_train = std::min<std::size_t>(
            by_label[1].size(),
            static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(by_label[1].size()))));
        const std::size_t neg_train = std::min(by_label[0].size(), n_train - std::min(n_train, pos_train));
        const std::array<std::size_t, 2> take = {neg_train, pos_train};
        for (std::size_t c = 0; c < 2; ++c) {
            rng.shuffle(std::span(by_label[c]));
            for (std::size_t i = 0; i < by_label[c].size(); ++i) {
                (i < take[c] ? train_ids : test_ids).push_back(by_label[c][i]);
            }
        }
    }
    std::sort(train_ids.begin(), train_ids.end());
    std::sort(test_ids.begin(), test_ids.end());

    SplitResult out;
    out.train = detail::subset(dataset, train_ids);
    out.test = detail::subset(dataset, test_ids);
    out.train_source_ids = std::move(train_ids);
    out.test_source_ids = std::move(test_ids);
    out.seed = seed;
    out.train_fraction = train_fraction;
    return out;
}

// --- synthetic traffic ------------------------------------------------------

struct IntRange {
    std::int64_t lo = 0;
    std::int64_t hi = 0;
};

/// Planted generating rule for synthetic flows.
///
/// Attacks raise source-port entropy (ports drawn from the whole low range
/// instead of the narrow ephemeral band) and/or inflate source bytes. Packet
/// counts and destination bytes are label independent, so sport and
/// src_bytes are the only causal features.
struct SyntheticRule {
    double attack_fraction = 0.2;
    // Relative weights of PortScanner .. Exploit.
    std::array<double, 5> kind_weights = {1, 1, 1, 1, 1};

    IntRange trusted_sport = {49152, 65535};
    IntRange attack_sport = {0, 49151};
    IntRange normal_src_bytes = {60, 1200};
    IntRange inflated_src_bytes = {2000, 9000};
    IntRange src_pkts = {1, 60};
    IntRange dst_pkts = {0, 60};
    IntRange dst_bytes = {0, 30000};

    static bool scrambles_sport(AttackKind kind) {
        return kind == AttackKind::PortScanner || kind == AttackKind::AddressScan ||
               kind == AttackKind::DeviceIdentification;
    }
    static bool inflates_src_bytes(AttackKind kind) {
        return kind == AttackKind::DeviceIdentification || kind == AttackKind::AggressiveMode ||
               kind == AttackKind::Exploit;
    }
};

inline MessageDataset generate_synthetic(std::size_t n, std::uint64_t seed, const SyntheticRule& rule = {},
                                         std::size_t slot_size = 100) {
    if (n == 0) throw Error("synthetic dataset needs n >= 1");
    if (!(rule.attack_fraction >= 0.0 && rule.attack_fraction <= 1.0)) {
        throw Error("attack fraction must lie in [0, 1]");
    }
    const double weight_total = std::accumulate(rule.kind_weights.begin(), rule.kind_weights.end(), 0.0);
    if (rule.attack_fraction > 0.0 && !(weight_total > 0.0)) throw Error("attack kind weights must sum to > 0");

    detail::Rng rng(seed);
    auto draw = [&](IntRange r) { return static_cast<double>(rng.between(r.lo, r.hi)); };

    MessageDataset ds;
    ds.feature_count = kWustlFeatureCount;
    ds.slot_size = slot_size;
    ds.schema_name = std::string(kWustlSchema);
    ds.messages.reserve(n);

    for (std::size_t i = 0; i < n; ++i) {
        AttackKind kind = AttackKind::Trusted;
        if (rng.uniform() < rule.attack_fraction) {
            double pick = rng.uniform() * weight_total;
            std::size_t k = 0;
            while (k + 1 < rule.kind_weights.size() && pick >= rule.kind_weights[k]) {
                pick -= rule.kind_weights[k];
                ++k;
            }
            kind = static_cast<AttackKind>(k + 1);
        }
        const double sport = draw(SyntheticRule::scrambles_sport(kind) ? rule.attack_sport : rule.trusted_sport);
        const double src_bytes =
            draw(SyntheticRule::inflates_src_bytes(kind) ? rule.inflated_src_bytes : rule.normal_src_bytes);
        const double src_pkts = draw(rule.src_pkts);
        const double dst_pkts = draw(rule.dst_pkts);
        const double dst_bytes = draw(rule.dst_bytes);

        std::vector<double> f(kWustlFeatureCount);
        f[wustl::kSport] = sport;
        f[wustl::kTotalPkts] = src_pkts + dst_pkts;
        f[wustl::kTotalBytes] = src_bytes + dst_bytes;
        f[wustl::kSrcPkts] = src_pkts;
        f[wustl::kDstPkts] = dst_pkts;
        f[wustl::kSrcBytes] = src_bytes;

        ds.messages.push_back({i, FeatureVector(std::move(f)), is_attack(kind) ? 1 : 0, kind});
    }
    return ds;
}

// --- standardization --------------------------------------------------------

/// Per-feature affine transform fitted on training data.
struct Scaler {
    std::vector<double> means;
    std::vector<double> stddevs;  // population standard deviation
    std::vector<bool> passthrough; // zero-variance features are left unchanged

    bool empty() const noexcept { return means.empty(); }

    double apply(std::size_t m, double v) const {
        return passthrough[m] ? v : (v - means[m]) / stddevs[m];
    }

    FeatureVector apply(const FeatureVector& x) const {
        std::vector<double> out(x.size());
        for (std::size_t m = 0; m < x.size(); ++m) out[m] = apply(m, x[m]);
        return FeatureVector(std::move(out));
    }

    void apply_in_place(std::span<double> x) const {
        for (std::size_t m = 0; m < x.size(); ++m) x[m] = apply(m, x[m]);
    }

    static Scaler fit(const MessageDataset& train) {
        if (train.empty()) throw Error("cannot fit scaler on an empty dataset");
        const std::size_t m = train.feature_count;
        const auto n = static_cast<double>(train.size());
        Scaler s;
        s.means.assign(m, 0.0);
        s.stddevs.assign(m, 0.0);
        s.passthrough.assign(m, false);
        for (const auto& msg : train.messages) {
            for (std::size_t j = 0; j < m; ++j) s.means[j] += msg.features[j];
        }
        for (auto& v : s.means) v /= n;
        for (const auto& msg : train.messages) {
            for (std::size_t j = 0; j < m; ++j) {
                const double d = msg.features[j] - s.means[j];
                s.stddevs[j] += d * d;
            }
        }
        for (std::size_t j = 0; j < m; ++j) {
            s.stddevs[j] = std::sqrt(s.stddevs[j] / n);
            s.passthrough[j] = !(s.stddevs[j] > 0.0);
        }
        return s;
    }
};

struct StandardizeResult {
    MessageDataset train;
    MessageDataset test;
    Scaler scaler;
};

inline constexpr std::string_view kStandardizedPrefix = "standardized:";

inline MessageDataset apply_scaler(const MessageDataset& ds, const Scaler& scaler) {
    MessageDataset out = ds;
    for (auto& msg : out.messages) msg.features = scaler.apply(msg.features);
    if (!out.schema_name.starts_with(kStandardizedPrefix)) {
        out.schema_name = std::string(kStandardizedPrefix) + out.schema_name;
    }
    return out;
}

/// Scales both sets with statistics from `train` only.
inline StandardizeResult standardize(const MessageDataset& train, const MessageDataset& test) {
    if (test.feature_count != train.feature_count && !test.empty()) {
        throw Error("train and test feature counts differ");
    }
    StandardizeResult r;
    r.scaler = Scaler::fit(train);
    r.train = apply_scaler(train, r.scaler);
    r.test = apply_scaler(test, r.scaler);
    return r;
}

} // namespace gridxai
