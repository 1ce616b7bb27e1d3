#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace gridxai;
using testing_support::linear_model;

namespace {

RegressorModel tree_model(std::vector<TreeNode> nodes, std::size_t m) {
    RegressorModel model;
    model.spec = ModelSpec::defaults(ModelKind::Cart);
    model.feature_count = m;
    model.schema_name = "generic-" + std::to_string(m);
    model.fit = ForestFit{{RegressionTree(std::move(nodes))}};
    return model;
}

/// z1 * z2 on the grid {0,2} x {0,3}.
RegressorModel product_model() {
    return tree_model({TreeNode{0, 1.0, 1, 2, 0, 0}, TreeNode{-1, 0, -1, -1, 0.0, 0}, TreeNode{1, 1.5, 3, 4, 0, 0},
                       TreeNode{-1, 0, -1, -1, 0.0, 0}, TreeNode{-1, 0, -1, -1, 6.0, 0}},
                      2);
}

RegressorModel constant_model(double c, std::size_t m) { return tree_model({TreeNode{-1, 0, -1, -1, c, 0}}, m); }

/// Shapley values by averaging marginal contributions over all M! orderings.
std::vector<double> permutation_oracle(const RegressorModel& model, const FeatureVector& x, const BackgroundSet& bg) {
    const std::size_t m = x.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> phi(m, 0.0);
    double perms = 0.0;
    do {
        Coalition s;
        double prev = coalition_value(model, x, s, bg);
        for (auto f : order) {
            s = s.with(f);
            const double cur = coalition_value(model, x, s, bg);
            phi[f] += cur - prev;
            prev = cur;
        }
        perms += 1.0;
    } while (std::next_permutation(order.begin(), order.end()));
    for (auto& v : phi) v /= perms;
    return phi;
}

struct Fixture {
    MessageDataset train;
    MessageDataset test;
};

const Fixture& synthetic() {
    static const Fixture f = [] {
        const auto s = split_dataset(generate_synthetic(400, 21), 0.7, 21);
        return Fixture{s.train, s.test};
    }();
    return f;
}

} // namespace

TEST(Background, WholeTrainingSetIsOrderIndependent) {
    const auto& train = synthetic().train;
    const auto model = linear_model({0, 1, 0, 0, 0, 0, 0});
    const auto a = build_background(model, train, train.size(), 1);
    const auto b = build_background(model, train, train.size(), 2);
    for (std::size_t m = 0; m < 6; ++m) EXPECT_NEAR(a.feature_means()[m], b.feature_means()[m], 1e-9);
}

TEST(Background, DeterministicSelection) {
    const auto& train = synthetic().train;
    const auto model = linear_model({0, 1, 0, 0, 0, 0, 0});
    const auto a = build_background(model, train, 50, 9);
    const auto b = build_background(model, train, 50, 9);
    EXPECT_EQ(a.rows(), b.rows());
    const auto c = build_background(model, train, 50, 10);
    EXPECT_NE(a.rows(), c.rows());
}

TEST(Background, TooLarge) {
    const auto& train = synthetic().train;
    EXPECT_THROW(build_background(linear_model({0, 1, 0, 0, 0, 0, 0}), train, train.size() + 1, 0), Error);
}

TEST(Background, ConstantModelMeanPrediction) {
    const auto& train = synthetic().train;
    const auto bg = build_background(constant_model(0.25, 6), train, 30, 4);
    EXPECT_EQ(bg.mean_prediction(), 0.25);
}

TEST(CoalitionValue, ProductModel) {
    const auto model = product_model();
    const BackgroundSet bg(model, {FeatureVector{0, 0}}, 0);
    const FeatureVector x{2, 3};
    EXPECT_EQ(coalition_value(model, x, Coalition::of({0}), bg), 0.0);
    EXPECT_EQ(coalition_value(model, x, Coalition::of({1}), bg), 0.0);
    EXPECT_EQ(coalition_value(model, x, Coalition::of({0, 1}), bg), 6.0);
    EXPECT_EQ(coalition_value(model, x, Coalition{}, bg), 0.0);
}

TEST(CoalitionValue, FullAndEmpty) {
    const auto& d = synthetic();
    const auto model = train(ModelSpec::defaults(ModelKind::Cart), d.train);
    const auto bg = build_background(model, d.train, 40, 3);
    const auto& x = d.test.messages[0].features;
    EXPECT_EQ(coalition_value(model, x, Coalition::full(6), bg), predict(model, x));
    EXPECT_EQ(coalition_value(model, x, Coalition{}, bg), bg.mean_prediction());
}

TEST(ShapleyExact, ProductModel) {
    const auto model = product_model();
    const BackgroundSet bg(model, {FeatureVector{0, 0}}, 0);
    const auto e = shapley_exact(model, FeatureVector{2, 3}, bg);
    EXPECT_DOUBLE_EQ(e.contributions[0], 3.0);
    EXPECT_DOUBLE_EQ(e.contributions[1], 3.0);
    EXPECT_DOUBLE_EQ(e.base_value, 0.0);
    EXPECT_DOUBLE_EQ(e.prediction, 6.0);
    EXPECT_EQ(e.coalition_evaluations, 4u);
}

TEST(ShapleyExact, ConstantModel) {
    const auto& train = synthetic().train;
    const auto model = constant_model(0.7, 6);
    const auto bg = build_background(model, train, 20, 0);
    const auto e = shapley_exact(model, train.messages[3].features, bg);
    for (double c : e.contributions) EXPECT_EQ(c, 0.0);
}

TEST(ShapleyExact, MatchesPermutationOracle) {
    const auto& d = synthetic();
    for (auto kind : {ModelKind::Cart, ModelKind::GradientBoosting}) {
        auto spec = ModelSpec::defaults(kind, 2);
        spec.n_estimators = std::min<std::size_t>(spec.n_estimators, 20);
        const auto model = train(spec, d.train);
        const auto bg = build_background(model, d.train, 15, 6);
        for (std::size_t i = 0; i < 3; ++i) {
            const auto& x = d.test.messages[i].features;
            const auto e = shapley_exact(model, x, bg);
            const auto oracle = permutation_oracle(model, x, bg);
            for (std::size_t m = 0; m < 6; ++m) EXPECT_NEAR(e.contributions[m], oracle[m], 1e-12);
        }
    }
}

TEST(ShapleyExact, EfficiencyAndEvaluationCount) {
    const auto& d = synthetic();
    const auto model = train(ModelSpec::defaults(ModelKind::ExtraTrees, 5), d.train);
    const auto bg = build_background(model, d.train, 25, 6);
    for (std::size_t i = 0; i < 10; ++i) {
        const auto e = shapley_exact(model, d.test.messages[i].features, bg);
        EXPECT_LE(std::abs(e.efficiency_gap()), 1e-9);
        EXPECT_EQ(e.coalition_evaluations, 64u);
    }
}

TEST(ShapleyExact, Symmetry) {
    // f(z) = 1 when z0 + z1 >= 1 on binary inputs: features 0 and 1 interchangeable.
    const auto model = tree_model({TreeNode{0, 0.5, 1, 2, 0, 0}, TreeNode{1, 0.5, 3, 4, 0, 0},
                                   TreeNode{-1, 0, -1, -1, 1.0, 0}, TreeNode{-1, 0, -1, -1, 0.0, 0},
                                   TreeNode{-1, 0, -1, -1, 1.0, 0}},
                                  3);
    const BackgroundSet bg(model, {FeatureVector{0, 0, 5}, FeatureVector{1, 0, 2}, FeatureVector{0, 1, 7}}, 0);
    const auto e = shapley_exact(model, FeatureVector{1, 1, 3}, bg);
    EXPECT_NEAR(e.contributions[0], e.contributions[1], 1e-15);
    EXPECT_EQ(e.contributions[2], 0.0);
}

TEST(ShapleyExact, DummyFeatureGetsZero) {
    const auto& d = synthetic();
    const auto model = train(ModelSpec::defaults(ModelKind::Cart), d.train);
    const auto& tree = std::get<ForestFit>(model.fit).trees[0];
    const auto bg = build_background(model, d.train, 30, 2);
    const auto e = shapley_exact(model, d.test.messages[1].features, bg);
    for (std::size_t m = 0; m < 6; ++m) {
        if (!tree.uses_feature(m)) EXPECT_EQ(e.contributions[m], 0.0) << m;
    }
}

TEST(ShapleyExact, TooManyFeatures) {
    std::vector<double> w(18, 0.1);
    const auto model = linear_model(w);
    const FeatureVector x(std::vector<double>(17, 1.0));
    const BackgroundSet bg(model, {x}, 0);
    try {
        shapley_exact(model, x, bg);
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("16"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("linear"), std::string::npos);
    }
    EXPECT_NO_THROW(shapley_linear(model, x, bg));
}

TEST(ShapleyExact, WeightsSumToOneAcrossSizes) {
    for (std::size_t m = 1; m <= 16; ++m) {
        const auto w = shapley_weights(m);
        double total = 0.0;
        double binom = 1.0;
        for (std::size_t s = 0; s < m; ++s) {
            total += w[s] * binom;
            binom = binom * static_cast<double>(m - 1 - s) / static_cast<double>(s + 1);
        }
        EXPECT_NEAR(total, 1.0, 1e-12) << m;
    }
}

TEST(ShapleyLinear, SingleFeature) {
    const auto model = linear_model({2, 3});
    const BackgroundSet bg(model, {FeatureVector{3}, FeatureVector{5}}, 0);
    const auto e = shapley_linear(model, FeatureVector{6}, bg);
    EXPECT_DOUBLE_EQ(e.contributions[0], 6.0);
}

TEST(ShapleyLinear, InstanceAtMean) {
    const auto model = linear_model({1, -2, 0.5});
    const BackgroundSet bg(model, {FeatureVector{0, 4}, FeatureVector{2, 0}}, 0);
    const auto e = shapley_linear(model, FeatureVector{1, 2}, bg);
    for (double c : e.contributions) EXPECT_EQ(c, 0.0);
}

TEST(ShapleyLinear, TwoFeatureHandArithmetic) {
    const auto model = linear_model({0, 1, -2});
    const BackgroundSet bg(model, {FeatureVector{0, 0}, FeatureVector{2, 2}}, 0);
    const auto e = shapley_linear(model, FeatureVector{3, 0}, bg);
    EXPECT_DOUBLE_EQ(e.contributions[0], 2.0);
    EXPECT_DOUBLE_EQ(e.contributions[1], 2.0);
    EXPECT_DOUBLE_EQ(e.base_value, -1.0);
    EXPECT_DOUBLE_EQ(e.prediction, 3.0);
    EXPECT_DOUBLE_EQ(e.base_value + e.contributions[0] + e.contributions[1], e.prediction);
}

TEST(ShapleyLinear, MatchesExactEnumeration) {
    std::mt19937_64 gen(5);
    std::normal_distribution<double> n01;
    for (int t = 0; t < 20; ++t) {
        std::vector<double> w(7);
        for (auto& v : w) v = n01(gen);
        const auto model = linear_model(w);
        std::vector<FeatureVector> rows;
        for (int b = 0; b < 10; ++b) {
            std::vector<double> r(6);
            for (auto& v : r) v = n01(gen);
            rows.emplace_back(r);
        }
        const BackgroundSet bg(model, rows, 0);
        std::vector<double> x(6);
        for (auto& v : x) v = n01(gen);
        const auto a = shapley_exact(model, FeatureVector(x), bg);
        const auto b = shapley_linear(model, FeatureVector(x), bg);
        for (std::size_t m = 0; m < 6; ++m) EXPECT_NEAR(a.contributions[m], b.contributions[m], 1e-9);
        EXPECT_NEAR(a.base_value, b.base_value, 1e-9);
    }
}

TEST(ShapleyLinear, RejectsNonLinear) {
    const auto model = product_model();
    const BackgroundSet bg(model, {FeatureVector{0, 0}}, 0);
    EXPECT_THROW(shapley_linear(model, FeatureVector{2, 3}, bg), Error);
}

TEST(Gate, Examples) {
    const std::vector<double> w{2};
    const std::vector<double> expected{10};
    EXPECT_TRUE(gate_check_expected(w, FeatureVector{3}, expected)[0]);
    EXPECT_FALSE(gate_check_expected(w, FeatureVector{6}, expected)[0]);
    const std::vector<double> zero{0};
    const std::vector<double> zero_expected{0};
    EXPECT_TRUE(gate_check_expected(zero, FeatureVector{1e9}, zero_expected)[0]);
}

TEST(Gate, BackgroundExpectation) {
    const auto model = linear_model({0, 2});
    const BackgroundSet bg(model, {FeatureVector{4}, FeatureVector{6}}, 0);
    const std::vector<double> w{2};
    EXPECT_TRUE(gate_check(w, FeatureVector{5}, bg)[0]);
    EXPECT_FALSE(gate_check(w, FeatureVector{5.5}, bg)[0]);
}

TEST(Batch, SingleMessageEqualsExplanation) {
    const auto& d = synthetic();
    const auto model = train(ModelSpec::defaults(ModelKind::Cart), d.train);
    const auto bg = build_background(model, d.train, 20, 1);
    MessageDataset one = d.test;
    one.messages.resize(1);
    const auto shap = explain_batch(model, one, bg);
    const auto e = shapley_exact(model, one.messages[0].features, bg);
    ASSERT_EQ(shap.rows(), 1u);
    EXPECT_EQ(std::vector<double>(shap.row(0).begin(), shap.row(0).end()), e.contributions);
    EXPECT_EQ(shap.suppressed[0], 0u);
    EXPECT_EQ(shap.feature_names, feature_names(kWustlSchema));
}

TEST(Batch, GateSuppressingEverything) {
    // Every weight positive and the instance above every mean: all gates fail.
    const auto model = linear_model({0, 1, 1});
    const BackgroundSet bg(model, {FeatureVector{0, 0}}, 0);
    MessageDataset ds = testing_support::make_dataset({{5, 5}}, {1});
    ExplainOptions opts;
    opts.gate = true;
    const auto shap = explain_batch(model, ds, bg, opts);
    EXPECT_EQ(shap.suppressed[0], 2u);
    for (double v : shap.row(0)) EXPECT_EQ(v, 0.0);
}

TEST(Batch, ParallelMatchesSerial) {
    const auto& d = synthetic();
    const auto model = train(ModelSpec::defaults(ModelKind::RandomForest, 4), d.train);
    const auto bg = build_background(model, d.train, 20, 1);
    const auto shap = explain_batch(model, d.test, bg);
    for (std::size_t i = 0; i < d.test.size(); i += 17) {
        const auto e = shapley_exact(model, d.test.messages[i].features, bg, d.test.messages[i].id);
        EXPECT_EQ(std::vector<double>(shap.row(i).begin(), shap.row(i).end()), e.contributions);
        EXPECT_EQ(shap.ids[i], e.id);
    }
}

TEST(ShapCsv, RoundTrip) {
    const auto& d = synthetic();
    const auto model = train(ModelSpec::defaults(ModelKind::Cart), d.train);
    const auto bg = build_background(model, d.train, 20, 1);
    const auto shap = explain_batch(model, d.test, bg);
    std::stringstream ss;
    write_shap_csv(ss, shap);
    const auto back = read_shap_csv(ss);
    EXPECT_EQ(back.values, shap.values);
    EXPECT_EQ(back.ids, shap.ids);
    EXPECT_EQ(back.base_values, shap.base_values);
    EXPECT_EQ(back.predictions, shap.predictions);
    EXPECT_EQ(back.feature_names, shap.feature_names);
}
