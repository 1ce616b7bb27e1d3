#pragma once

// Domain types shared by every stage of the pipeline: feature vectors,
// labelled flow records, datasets and the attack taxonomy.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace gridxai {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad or inconsistent input data (files, datasets, model files).
class DataError : public Error {
public:
    using Error::Error;
};

using MessageId = std::size_t;

inline constexpr std::string_view kWustlSchema = "wustl-iiot-2018";
inline constexpr std::size_t kWustlFeatureCount = 6;

// Slot indices of the canonical WUSTL feature order.
namespace wustl {
inline constexpr std::size_t kSport = 0;
inline constexpr std::size_t kTotalPkts = 1;
inline constexpr std::size_t kTotalBytes = 2;
inline constexpr std::size_t kSrcPkts = 3;
inline constexpr std::size_t kDstPkts = 4;
inline constexpr std::size_t kSrcBytes = 5;
} // namespace wustl

/// Numeric feature tuple of one control/status message.
class FeatureVector {
public:
    FeatureVector() = default;
    explicit FeatureVector(std::vector<double> values) : values_(std::move(values)) {}
    FeatureVector(std::initializer_list<double> values) : values_(values) {}

    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }
    std::span<const double> values() const noexcept { return values_; }

    bool operator==(const FeatureVector&) const = default;

private:
    std::vector<double> values_;
};

enum class AttackKind : std::uint8_t {
    Trusted = 0,
    PortScanner = 1,
    AddressScan = 2,
    DeviceIdentification = 3,
    AggressiveMode = 4,
    Exploit = 5,
};

inline constexpr std::size_t kAttackKindCount = 6;

inline constexpr std::array<AttackKind, kAttackKindCount> kAllAttackKinds = {
    AttackKind::Trusted,        AttackKind::PortScanner,    AttackKind::AddressScan,
    AttackKind::DeviceIdentification, AttackKind::AggressiveMode, AttackKind::Exploit,
};

inline constexpr bool is_attack(AttackKind kind) noexcept { return kind != AttackKind::Trusted; }

inline std::string_view to_string(AttackKind kind) {
    switch (kind) {
    case AttackKind::Trusted: return "trusted";
    case AttackKind::PortScanner: return "port-scanner";
    case AttackKind::AddressScan: return "address-scan";
    case AttackKind::DeviceIdentification: return "device-identification";
    case AttackKind::AggressiveMode: return "aggressive-mode";
    case AttackKind::Exploit: return "exploit";
    }
    throw Error("invalid attack kind");
}

inline AttackKind attack_kind_from_string(std::string_view name) {
    for (auto kind : kAllAttackKinds) {
        if (to_string(kind) == name) {
            return kind;
        }
    }
    throw DataError("unknown attack kind '" + std::string(name) + "'");
}

struct LabeledMessage {
    MessageId id = 0;
    FeatureVector features;
    int label = 0; // ground truth: 1 = attack, 0 = trusted
    std::optional<AttackKind> kind;

    bool operator==(const LabeledMessage&) const = default;
};

struct MessageDataset {
    std::vector<LabeledMessage> messages;
    std::size_t feature_count = 0;
    std::size_t slot_size = 100;
    std::string schema_name = std::string(kWustlSchema);

    std::size_t size() const noexcept { return messages.size(); }
    bool empty() const noexcept { return messages.empty(); }

    /// Number of time slots, ceil(n / slot_size).
    std::size_t slot_count() const noexcept {
        if (slot_size == 0) return 0;
        return (messages.size() + slot_size - 1) / slot_size;
    }

    std::vector<double> labels() const {
        std::vector<double> out;
        out.reserve(messages.size());
        for (const auto& m : messages) out.push_back(static_cast<double>(m.label));
        return out;
    }

    bool operator==(const MessageDataset&) const = default;
};

struct Violation {
    MessageId id = 0;
    std::string field;
    std::string message;

    bool operator==(const Violation&) const = default;
};

/// Returns the canonical feature names of a registered schema.
/// "wustl-iiot-2018" gives the six flow features; "generic-<M>" gives f0..f{M-1}.
inline std::vector<std::string> feature_names(std::string_view schema_name) {
    // Standardized copies keep the names of the schema they came from.
    if (schema_name.starts_with("standardized:")) schema_name.remove_prefix(13);
    if (schema_name == kWustlSchema) {
        return {"sport", "total_pkts", "total_bytes", "src_pkts", "dst_pkts", "src_bytes"};
    }
    constexpr std::string_view prefix = "generic-";
    if (schema_name.starts_with(prefix)) {
        auto digits = schema_name.substr(prefix.size());
        bool numeric = !digits.empty() && digits.size() < 6;
        for (char c : digits) numeric = numeric && c >= '0' && c <= '9';
        if (numeric) {
            std::size_t count = std::stoul(std::string(digits));
            if (count > 0) {
                std::vector<std::string> names;
                names.reserve(count);
                for (std::size_t i = 0; i < count; ++i) names.push_back("f" + std::to_string(i));
                return names;
            }
        }
    }
    throw Error("unknown schema '" + std::string(schema_name) + "'");
}

/// Collects every type-invariant violation in the dataset. Empty means valid.
inline std::vector<Violation> validate_dataset(const MessageDataset& dataset) {
    std::vector<Violation> out;
    const bool wustl = dataset.schema_name == kWustlSchema;

    if (wustl && dataset.feature_count != kWustlFeatureCount) {
        out.push_back({0, "feature_count", "wustl schema declares 6 features"});
    }
    if (dataset.slot_size == 0) {
        out.push_back({0, "slot_size", "slot size must be positive"});
    }

    for (std::size_t i = 0; i < dataset.messages.size(); ++i) {
        const auto& msg = dataset.messages[i];
        if (msg.id != i) {
            out.push_back({msg.id, "id", "message ids must be dense 0..n-1 in order"});
        }
        if (msg.features.size() != dataset.feature_count) {
            out.push_back({msg.id, "features", "feature length"});
            continue;
        }
        for (std::size_t m = 0; m < msg.features.size(); ++m) {
            const double v = msg.features[m];
            if (!std::isfinite(v)) {
                out.push_back({msg.id, "features[" + std::to_string(m) + "]", "non-finite value"});
                continue;
            }
            if (wustl) {
                if (m == wustl::kSport && (v < 0.0 || v > 65535.0)) {
                    out.push_back({msg.id, "sport", "port outside [0, 65535]"});
                } else if (m != wustl::kSport && v < 0.0) {
                    out.push_back({msg.id, feature_names(kWustlSchema)[m], "negative count"});
                }
            }
        }
        if (msg.label != 0 && msg.label != 1) {
            out.push_back({msg.id, "label", "label must be 0 or 1"});
        }
        if (msg.kind && (msg.label == 0) != (*msg.kind == AttackKind::Trusted)) {
            out.push_back({msg.id, "kind", "label and attack kind disagree"});
        }
    }
    return out;
}

/// Throws DataError carrying the first violation when the dataset is invalid.
inline void require_valid(const MessageDataset& dataset) {
    auto violations = validate_dataset(dataset);
    if (!violations.empty()) {
        const auto& v = violations.front();
        throw DataError("invalid dataset: message " + std::to_string(v.id) + " field " + v.field +
                        ": " + v.message);
    }
}

/// Re-numbers ids 0..n-1 in current order.
inline void renumber(MessageDataset& dataset) {
    for (std::size_t i = 0; i < dataset.messages.size(); ++i) dataset.messages[i].id = i;
}

} // namespace gridxai
