#pragma once

// Command-line front end. Exit codes: 0 success, 1 usage error, 2 data or
// model error. All randomness comes from explicit --seed flags.

#include <algorithm>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gridxai/core_model.hpp"
#include "gridxai/explain.hpp"
#include "gridxai/ingest.hpp"
#include "gridxai/regress.hpp"
#include "gridxai/report.hpp"
#include "gridxai/severity.hpp"
#include "gridxai/watchdog.hpp"

namespace gridxai {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

namespace detail {

inline void require_file(const std::string& path) {
    if (!std::filesystem::exists(path)) throw DataError(path + ": file not found");
}

/// Accepts files written with or without the AttackKind column.
inline MessageDataset load_flows(const std::string& path, std::size_t slot_size) {
    require_file(path);
    std::ifstream in(path, std::ios::binary);
    std::string header;
    std::getline(in, header);
    const auto cells = split_csv_line(header);
    const bool has_kind = std::find(cells.begin(), cells.end(), "AttackKind") != cells.end();
    return load_csv(path, has_kind ? SchemaMap::wustl_with_kind() : SchemaMap::wustl(), slot_size);
}

struct SynthArgs {
    std::size_t n = 2000;
    std::uint64_t seed = 0;
    double attack_frac = 0.2;
    std::string out;
    bool with_kind = false;
};

struct TrainArgs {
    std::string input;
    std::string model = "random-forest";
    double split = 0.7;
    std::uint64_t seed = 0;
    std::string out;
    bool standardize = false;
    bool stratified = false;
    std::string test_out;
    std::string train_out;
};

struct EvaluateArgs {
    std::string model;
    std::string input;
    double threshold = kDefaultThreshold;
    std::string report;
};

struct ExplainArgs {
    std::string model;
    std::string input;
    std::size_t background = kDefaultBackgroundSize;
    std::uint64_t seed = 0;
    bool gate = false;
    std::string out;
};

struct ClusterArgs {
    std::string shap;
    std::size_t k = 2;
    std::string linkage = "ward";
    std::string out;
    std::string dendrogram;
};

struct WatchdogArgs {
    std::string model;
    std::string input;
    std::size_t slot_size = 100;
    std::size_t k = 2;
    double threshold = kDefaultThreshold;
    bool gate = false;
    std::string report;
    std::size_t background = kDefaultBackgroundSize;
    std::uint64_t seed = 0;
    std::size_t max_slots = 0;
    std::string linkage = "ward";
    bool no_global = false;
};

inline int cmd_synth(const SynthArgs& a, std::ostream& out) {
    SyntheticRule rule;
    rule.attack_fraction = a.attack_frac;
    const auto ds = generate_synthetic(a.n, a.seed, rule);
    export_csv(a.out, ds, a.with_kind ? SchemaMap::wustl_with_kind() : SchemaMap::wustl());
    std::size_t attacks = 0;
    for (const auto& m : ds.messages) attacks += static_cast<std::size_t>(m.label);
    out << "wrote " << ds.size() << " messages (" << attacks << " attacks) to " << a.out << '\n';
    return kExitOk;
}

inline int cmd_train(const TrainArgs& a, std::ostream& out) {
    const auto kind = model_kind_from_string(a.model);
    const auto data = load_flows(a.input, 100);
    const auto split = split_dataset(data, a.split, a.seed, a.stratified);
    auto spec = ModelSpec::defaults(kind, a.seed);
    spec.standardize = a.standardize;
    const auto model = train(spec, split.train);
    save_model(model, a.out);
    if (!a.test_out.empty()) export_csv(a.test_out, split.test, SchemaMap::wustl());
    if (!a.train_out.empty()) export_csv(a.train_out, split.train, SchemaMap::wustl());

    const auto train_scores = predict_all(model, split.train);
    const auto train_labels = split.train.labels();
    Json summary{{"model", std::string(to_string(kind))},
                 {"train_size", split.train.size()},
                 {"test_size", split.test.size()},
                 {"training_mse", model.training_mse},
                 {"training_r2", r_squared(train_labels, train_scores)}};
    if (!split.test.empty()) {
        summary["test_metrics"] = to_json(evaluate(model, split.test, kDefaultThreshold));
    }
    out << summary.dump(2) << '\n';
    return kExitOk;
}

inline int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
    require_file(a.model);
    const auto model = load_model(a.model);
    const auto data = load_flows(a.input, 100);
    const auto metrics = evaluate(model, data, a.threshold);
    Json report{{"config",
                 Json{{"model_path", a.model},
                      {"model_digest", file_digest(a.model)},
                      {"input_path", a.input},
                      {"input_digest", file_digest(a.input)},
                      {"threshold", a.threshold}}},
                {"model", std::string(to_string(model.spec.kind))},
                {"messages", data.size()},
                {"metrics", to_json(metrics)}};
    write_json(a.report, report);
    out << "tp_rate " << metrics.tp_rate << " fp_rate " << metrics.fp_rate << " r2 " << metrics.r2 << " mse "
        << metrics.mse << " mae " << metrics.mae << '\n';
    return kExitOk;
}

inline int cmd_explain(const ExplainArgs& a, std::ostream& out) {
    require_file(a.model);
    const auto model = load_model(a.model);
    const auto data = load_flows(a.input, 100);
    const auto background = build_background(model, model.training_rows, a.background, a.seed);
    ExplainOptions options;
    options.gate = a.gate;
    const auto shap = explain_batch(model, data, background, options);
    export_shap_csv(a.out, shap);
    out << "explained " << shap.rows() << " messages against " << background.size() << " background rows\n";
    return kExitOk;
}

inline int cmd_cluster(const ClusterArgs& a, std::ostream& out) {
    const auto linkage = linkage_from_string(a.linkage);
    const auto shap = load_shap_csv(a.shap);
    if (a.k < 1 || a.k > shap.rows()) {
        throw Error("k must lie in [1, " + std::to_string(shap.rows()) + "]");
    }
    const auto tree = agglomerate(shap, linkage);
    const auto severity = risk_report(shap, tree, a.k);
    Json report{{"config",
                 Json{{"shap_path", a.shap}, {"shap_digest", file_digest(a.shap)}, {"k", a.k}, {"linkage", a.linkage}}},
                {"dendrogram", to_json(tree)},
                {"severity", to_json(severity)}};
    write_json(a.out, report);
    if (!a.dendrogram.empty()) {
        std::ofstream f(a.dendrogram, std::ios::binary);
        if (!f) throw DataError(a.dendrogram + ": cannot open for writing");
        write_linkage_csv(f, tree);
    }
    out << "clustered " << shap.rows() << " rows into " << a.k << " clusters\n";
    return kExitOk;
}

inline int cmd_watchdog(const WatchdogArgs& a, std::ostream& out) {
    require_file(a.model);
    const auto model = load_model(a.model);
    const auto stream = load_flows(a.input, a.slot_size);

    PipelineConfig config;
    config.threshold = a.threshold;
    config.background_size = a.background;
    config.background_seed = a.seed;
    config.slot_size = a.slot_size;
    config.max_slots = a.max_slots;
    config.k = a.k;
    config.linkage = linkage_from_string(a.linkage);
    config.gate = a.gate;
    config.global_clustering = !a.no_global;
    config.model_path = a.model;
    config.input_path = a.input;

    const auto background = build_background(model, model.training_rows, config.background_size, a.seed);
    const auto report = run_watchdog(config, model, background, stream);
    Json j = to_json(report);
    j["config"]["model_digest"] = file_digest(a.model);
    j["config"]["input_digest"] = file_digest(a.input);
    write_json(a.report, j);
    out << "watchdog processed " << report.decision_count() << " messages in " << report.slots.size()
        << " slots\n";
    return kExitOk;
}

} // namespace detail

/// Runs one CLI invocation. `args` excludes the program name.
inline int run_cli(std::vector<std::string> args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Proactive threat detection, Shapley explanation and Ward severity analysis for DER flow records",
                 "gridxai"};
    app.require_subcommand(1, 1);

    detail::SynthArgs synth;
    auto* s = app.add_subcommand("synth", "Generate a synthetic labelled flow dataset");
    s->add_option("--n", synth.n, "Number of messages")->required();
    s->add_option("--seed", synth.seed, "Random seed")->required();
    s->add_option("--attack-frac", synth.attack_frac, "Fraction of attack messages")->default_val(0.2);
    s->add_option("--out", synth.out, "Output CSV")->required();
    s->add_flag("--with-kind", synth.with_kind, "Append the AttackKind column");

    detail::TrainArgs tr;
    auto* t = app.add_subcommand("train", "Split a dataset and train a regressor");
    t->add_option("--input", tr.input, "Input CSV")->required();
    t->add_option("--model", tr.model, "Model family")
        ->required()
        ->check(CLI::IsMember({"linear", "cart", "random-forest", "extra-trees", "gradient-boosting", "adaboost"}));
    t->add_option("--split", tr.split, "Training fraction")->default_val(0.7);
    t->add_option("--seed", tr.seed, "Split and model seed")->default_val(0);
    t->add_option("--out", tr.out, "Model file")->required();
    t->add_flag("--standardize", tr.standardize, "Standardize features with training statistics");
    t->add_flag("--stratified", tr.stratified, "Stratify the split by label");
    t->add_option("--test-out", tr.test_out, "Write the held-out split as CSV");
    t->add_option("--train-out", tr.train_out, "Write the training split as CSV");

    detail::EvaluateArgs ev;
    auto* e = app.add_subcommand("evaluate", "Evaluate a model on labelled flows");
    e->add_option("--model", ev.model, "Model file")->required();
    e->add_option("--input", ev.input, "Input CSV")->required();
    e->add_option("--threshold", ev.threshold, "Decision threshold")->default_val(kDefaultThreshold);
    e->add_option("--report", ev.report, "Output JSON report")->required();

    detail::ExplainArgs ex;
    auto* x = app.add_subcommand("explain", "Exact Shapley attributions for every message");
    x->add_option("--model", ex.model, "Model file")->required();
    x->add_option("--input", ex.input, "Input CSV")->required();
    x->add_option("--background", ex.background, "Background sample size")->default_val(kDefaultBackgroundSize);
    x->add_option("--seed", ex.seed, "Background sampling seed")->default_val(0);
    x->add_flag("--gate", ex.gate, "Record only contributions passing the expected-effect gate");
    x->add_option("--out", ex.out, "Output Shapley matrix CSV")->required();

    detail::ClusterArgs cl;
    auto* c = app.add_subcommand("cluster", "Agglomerative severity clustering of a Shapley matrix");
    c->add_option("--shap", cl.shap, "Shapley matrix CSV")->required();
    c->add_option("--k", cl.k, "Number of clusters")->required();
    c->add_option("--linkage", cl.linkage, "Linkage")->default_val("ward")->check(CLI::IsMember({"ward", "complete"}));
    c->add_option("--out", cl.out, "Output JSON report")->required();
    c->add_option("--dendrogram", cl.dendrogram, "Also write the linkage CSV (left,right,cost,size)");

    detail::WatchdogArgs wd;
    auto* w = app.add_subcommand("watchdog", "Slot-by-slot detect, explain and severity loop");
    w->add_option("--model", wd.model, "Model file")->required();
    w->add_option("--input", wd.input, "Input CSV")->required();
    w->add_option("--slot-size", wd.slot_size, "Messages per time slot")->default_val(100);
    w->add_option("--k", wd.k, "Clusters per severity analysis")->default_val(2);
    w->add_option("--threshold", wd.threshold, "Decision threshold")->default_val(kDefaultThreshold);
    w->add_flag("--gate", wd.gate, "Record only contributions passing the expected-effect gate");
    w->add_option("--report", wd.report, "Output JSON report")->required();
    w->add_option("--background", wd.background, "Background sample size")->default_val(kDefaultBackgroundSize);
    w->add_option("--seed", wd.seed, "Background sampling seed")->default_val(0);
    w->add_option("--max-slots", wd.max_slots, "Stop after this many slots (0 = all)")->default_val(0);
    w->add_option("--linkage", wd.linkage, "Linkage")->default_val("ward")->check(CLI::IsMember({"ward", "complete"}));
    w->add_flag("--no-global", wd.no_global, "Skip the end-of-run clustering over all messages");

    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& ex_) {
        err << "error: " << ex_.what() << "\n\n" << app.help();
        return kExitUsage;
    }

    try {
        if (s->parsed()) return detail::cmd_synth(synth, out);
        if (t->parsed()) return detail::cmd_train(tr, out);
        if (e->parsed()) return detail::cmd_evaluate(ev, out);
        if (x->parsed()) return detail::cmd_explain(ex, out);
        if (c->parsed()) return detail::cmd_cluster(cl, out);
        if (w->parsed()) return detail::cmd_watchdog(wd, out);
    } catch (const std::exception& ex_) {
        err << "error: " << ex_.what() << '\n';
        return kExitData;
    }
    err << app.help();
    return kExitUsage;
}

} // namespace gridxai
