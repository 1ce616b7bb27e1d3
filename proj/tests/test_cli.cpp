#include <cstdlib>
#include <sstream>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace gridxai;
using testing_support::scratch_dir;
using testing_support::slurp;

namespace {

int run(std::vector<std::string> args, std::string* err_text = nullptr) {
    std::ostringstream out, err;
    const int code = run_cli(std::move(args), out, err);
    if (err_text) *err_text = err.str();
    return code;
}

/// synth -> train -> evaluate -> explain -> cluster -> watchdog in `dir`.
void chain(const std::filesystem::path& dir, const std::string& kind) {
    const auto p = [&](const char* f) { return (dir / f).string(); };
    ASSERT_EQ(run({"synth", "--n", "400", "--seed", "7", "--attack-frac", "0.2", "--out", p("flows.csv")}), 0);
    ASSERT_EQ(run({"train", "--input", p("flows.csv"), "--model", kind, "--split", "0.7", "--seed", "7", "--out",
                   p("model.json"), "--test-out", p("test.csv")}),
              0);
    ASSERT_EQ(run({"evaluate", "--model", p("model.json"), "--input", p("test.csv"), "--threshold", "0.5", "--report",
                   p("eval.json")}),
              0);
    ASSERT_EQ(run({"explain", "--model", p("model.json"), "--input", p("test.csv"), "--background", "30", "--seed",
                   "7", "--out", p("shap.csv")}),
              0);
    ASSERT_EQ(run({"cluster", "--shap", p("shap.csv"), "--k", "3", "--linkage", "ward", "--out", p("cluster.json")}),
              0);
    ASSERT_EQ(run({"watchdog", "--model", p("model.json"), "--input", p("test.csv"), "--slot-size", "50", "--k", "2",
                   "--threshold", "0.5", "--gate", "--background", "30", "--report", p("watchdog.json")}),
              0);
}

} // namespace

TEST(Cli, ChainIsByteIdenticalAcrossRuns) {
    const auto dir = scratch_dir("cli_rerun");
    const std::vector<std::string> files{"flows.csv", "model.json", "test.csv", "eval.json",
                                         "shap.csv",  "cluster.json", "watchdog.json"};
    chain(dir, "extra-trees");
    std::vector<std::string> first;
    for (const auto& f : files) first.push_back(slurp(dir / f));
    chain(dir, "extra-trees");
    for (std::size_t i = 0; i < files.size(); ++i) {
        EXPECT_FALSE(first[i].empty()) << files[i];
        EXPECT_TRUE(first[i] == slurp(dir / files[i])) << files[i];
    }
}

TEST(Cli, ReportsEchoConfigAndDigests) {
    const auto dir = scratch_dir("cli_echo");
    chain(dir, "linear");
    const auto eval = nlohmann::ordered_json::parse(slurp(dir / "eval.json"));
    EXPECT_EQ(eval["config"]["threshold"], 0.5);
    EXPECT_EQ(eval["config"]["input_digest"], file_digest(dir / "test.csv"));
    const auto wd = nlohmann::ordered_json::parse(slurp(dir / "watchdog.json"));
    EXPECT_EQ(wd["config"]["slot_size"], 50);
    EXPECT_EQ(wd["config"]["gate"], true);
    EXPECT_EQ(wd["slot_count"], 3);
    const auto shap = load_shap_csv(dir / "shap.csv");
    EXPECT_EQ(shap.rows(), 120u);
}

TEST(Cli, UsageErrors) {
    EXPECT_EQ(run({}), 1);
    EXPECT_EQ(run({"frobnicate"}), 1);
    EXPECT_EQ(run({"synth", "--seed", "1", "--out", "/tmp/x.csv"}), 1);
    EXPECT_EQ(run({"train", "--input", "a.csv", "--model", "svm", "--out", "m.json"}), 1);
    EXPECT_EQ(run({"synth", "--n", "ten", "--seed", "1", "--out", "/tmp/x.csv"}), 1);
}

TEST(Cli, DataErrors) {
    const auto dir = scratch_dir("cli_err");
    std::string err;
    EXPECT_EQ(run({"evaluate", "--model", (dir / "none.json").string(), "--input", "x.csv", "--threshold", "0.5",
                   "--report", (dir / "r.json").string()},
                  &err),
              2);
    EXPECT_NE(err.find("file not found"), std::string::npos) << err;
    {
        std::ofstream f(dir / "bad.csv");
        f << "Sport,TotPkts,TotBytes,SrcPkts,DstPkts,Target\n1,2,3,2,1,0\n";
    }
    EXPECT_EQ(run({"train", "--input", (dir / "bad.csv").string(), "--model", "cart", "--out",
                   (dir / "m.json").string()},
                  &err),
              2);
    EXPECT_NE(err.find("missing column SrcBytes"), std::string::npos) << err;
}

TEST(Cli, ClusterKOutOfRange) {
    const auto dir = scratch_dir("cli_k");
    chain(dir, "cart");
    EXPECT_EQ(run({"cluster", "--shap", (dir / "shap.csv").string(), "--k", "1000", "--out",
                   (dir / "c.json").string()}),
              2);
}

TEST(Cli, BinaryExitCodes) {
    const std::string cli = GRIDXAI_CLI_PATH;
    EXPECT_EQ(WEXITSTATUS(std::system((cli + " --help > /dev/null").c_str())), 0);
    EXPECT_EQ(WEXITSTATUS(std::system((cli + " bogus > /dev/null 2>&1").c_str())), 1);
    EXPECT_EQ(WEXITSTATUS(std::system((cli + " evaluate --model /nonexistent.json --input /nonexistent.csv "
                                              "--report /tmp/r.json > /dev/null 2>&1")
                                             .c_str())),
              2);
}
