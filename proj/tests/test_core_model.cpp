#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace gridxai;
using testing_support::make_dataset;

namespace {

MessageDataset three_wustl_messages() {
    return make_dataset({{50000, 10, 900, 6, 4, 400}, {51000, 3, 300, 2, 1, 120}, {1200, 8, 5000, 5, 3, 4400}},
                        {0, 0, 1}, std::string(kWustlSchema));
}

bool mentions(const std::vector<Violation>& v, MessageId id, const std::string& text) {
    for (const auto& x : v) {
        if (x.id == id && x.message.find(text) != std::string::npos) return true;
    }
    return false;
}

} // namespace

TEST(Validate, WellFormedDatasetHasNoViolations) { EXPECT_TRUE(validate_dataset(three_wustl_messages()).empty()); }

TEST(Validate, ShortFeatureVector) {
    auto ds = three_wustl_messages();
    ds.messages[1].features = FeatureVector{51000, 3, 300, 2, 1};
    const auto v = validate_dataset(ds);
    ASSERT_FALSE(v.empty());
    EXPECT_TRUE(mentions(v, 1, "feature length"));
    EXPECT_THROW(require_valid(ds), DataError);
}

TEST(Validate, NonFiniteValue) {
    auto ds = three_wustl_messages();
    ds.messages[0].features = FeatureVector{50000, 10, std::numeric_limits<double>::quiet_NaN(), 6, 4, 400};
    const auto v = validate_dataset(ds);
    EXPECT_TRUE(mentions(v, 0, "non-finite value"));
}

TEST(Validate, LabelMustBeBinary) {
    auto ds = three_wustl_messages();
    ds.messages[2].label = 2;
    EXPECT_FALSE(validate_dataset(ds).empty());
}

TEST(Validate, KindMustAgreeWithLabel) {
    auto ds = three_wustl_messages();
    ds.messages[0].kind = AttackKind::Exploit;
    EXPECT_FALSE(validate_dataset(ds).empty());
    ds.messages[0].kind = AttackKind::Trusted;
    EXPECT_TRUE(validate_dataset(ds).empty());
}

TEST(Validate, IdsMustBeDense) {
    auto ds = three_wustl_messages();
    ds.messages[2].id = 7;
    EXPECT_FALSE(validate_dataset(ds).empty());
    renumber(ds);
    EXPECT_TRUE(validate_dataset(ds).empty());
}

TEST(Validate, WustlPortRange) {
    auto ds = three_wustl_messages();
    ds.messages[0].features = FeatureVector{70000, 10, 900, 6, 4, 400};
    EXPECT_FALSE(validate_dataset(ds).empty());
}

TEST(FeatureNames, Wustl) {
    const std::vector<std::string> expected{"sport", "total_pkts", "total_bytes", "src_pkts", "dst_pkts", "src_bytes"};
    EXPECT_EQ(feature_names("wustl-iiot-2018"), expected);
    EXPECT_EQ(feature_names("standardized:wustl-iiot-2018"), expected);
}

TEST(FeatureNames, Generic) { EXPECT_EQ(feature_names("generic-3"), (std::vector<std::string>{"f0", "f1", "f2"})); }

TEST(FeatureNames, UnknownSchema) {
    try {
        feature_names("bogus");
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("unknown schema"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("bogus"), std::string::npos);
    }
}

TEST(AttackKindNames, RoundTrip) {
    for (auto k : kAllAttackKinds) EXPECT_EQ(attack_kind_from_string(to_string(k)), k);
    EXPECT_THROW(attack_kind_from_string("ddos"), DataError);
    EXPECT_FALSE(is_attack(AttackKind::Trusted));
    EXPECT_TRUE(is_attack(AttackKind::AddressScan));
}
