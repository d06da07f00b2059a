#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "deepglstm/deepglstm.hpp"
#include "support/generators.hpp"

using namespace deepglstm;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string out;
};

// Runs the CLI with `args`, capturing stdout. stderr goes to `err_file` when given.
Run run_cli(const std::string& args, const fs::path& err_file = "/dev/null") {
    const std::string cmd = std::string(DEEPGLSTM_CLI_PATH) + " " + args + " 2>" + err_file.string();
    Run r;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (!pipe) return r;
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
    const int status = ::pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

class Cli : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir_ = fs::temp_directory_path() / ("deepglstm_cli_" + std::to_string(::getpid()));
        fs::remove_all(dir_);
        testsupport::SyntheticSpec spec;
        spec.drugs = 8;
        spec.proteins = 3;
        spec.protein_min_len = 12;
        spec.protein_max_len = 20;
        testsupport::write_synthetic_davis(dir_ / "data", spec);
        const auto r = run_cli("train --data-dir " + (dir_ / "data").string() +
                               " --epochs 2 --batch-size 4 --max-len 20 --seed 3 --checkpoint " +
                               (dir_ / "m.ckpt").string());
        train_code_ = r.code;
        train_out_ = r.out;
    }
    static void TearDownTestSuite() { fs::remove_all(dir_); }

    static fs::path dir_;
    static int train_code_;
    static std::string train_out_;
};

fs::path Cli::dir_;
int Cli::train_code_ = -1;
std::string Cli::train_out_;

}  // namespace

TEST_F(Cli, TrainWritesEpochLogAndCheckpoint) {
    ASSERT_EQ(train_code_, 0);
    const auto ls = lines(train_out_);
    ASSERT_EQ(ls.size(), 2u);
    for (std::size_t i = 0; i < 2; ++i) {
        const auto j = nlohmann::json::parse(ls[i]);
        EXPECT_EQ(j["epoch"], i + 1);
        EXPECT_TRUE(j["train_mse"].is_number());
    }
    EXPECT_TRUE(nlohmann::json::parse(ls[1])["test_mse"].is_number());
    EXPECT_EQ(load_checkpoint(dir_ / "m.ckpt").params.config.max_len, 20u);
}

TEST_F(Cli, TrainWithoutDataDirIsUsageError) {
    const auto err = dir_ / "err.txt";
    EXPECT_EQ(run_cli("train --epochs 1", err).code, 2);
    EXPECT_NE(slurp(err).find("\"usage\""), std::string::npos);
    EXPECT_EQ(run_cli("", err).code, 2);
    EXPECT_EQ(run_cli("frobnicate", err).code, 2);
}

TEST_F(Cli, EvaluateWritesScatterAndMetrics) {
    ASSERT_EQ(train_code_, 0);
    const auto scatter = dir_ / "scatter.csv", metrics = dir_ / "metrics.json";
    const auto r = run_cli("evaluate --checkpoint " + (dir_ / "m.ckpt").string() + " --data-dir " +
                           (dir_ / "data").string() + " --scatter-out " + scatter.string() + " --metrics-out " +
                           metrics.string());
    ASSERT_EQ(r.code, 0);
    const auto report = nlohmann::json::parse(r.out);
    EXPECT_EQ(report["n_pairs"], 24);
    EXPECT_EQ(nlohmann::json::parse(slurp(metrics)), report);
    const auto rows = lines(slurp(scatter));
    ASSERT_EQ(rows.size(), 25u);
    EXPECT_EQ(rows[0], "measured,predicted");

    // The test split is the held-out 1/6 of the records.
    const auto test = run_cli("evaluate --checkpoint " + (dir_ / "m.ckpt").string() + " --data-dir " +
                              (dir_ / "data").string() + " --split test --seed 3");
    ASSERT_EQ(test.code, 0);
    EXPECT_EQ(nlohmann::json::parse(test.out)["n_pairs"], 4);
}

TEST_F(Cli, PredictMatchesLibrary) {
    ASSERT_EQ(train_code_, 0);
    const auto ck = load_checkpoint(dir_ / "m.ckpt");
    const std::string smiles = "CC(=O)Nc1ccc(O)cc1", seq = "MKTAYIAKQRQISFVK";
    const auto r = run_cli("predict --checkpoint " + (dir_ / "m.ckpt").string() + " --smiles '" + smiles +
                           "' --sequence " + seq);
    ASSERT_EQ(r.code, 0);
    const float expected = predict(ck.params, build_graph_inputs<float>(chem::parse_smiles(smiles), ck.params.config.power_mode),
                                   tokenize(seq, ck.params.config.max_len));
    EXPECT_EQ(std::stof(r.out), expected);

    EXPECT_EQ(run_cli("predict --checkpoint " + (dir_ / "m.ckpt").string() + " --smiles CCO").code, 2);
    const auto err = dir_ / "err.txt";
    EXPECT_EQ(run_cli("predict --checkpoint " + (dir_ / "m.ckpt").string() + " --smiles 'C1CC' --sequence MK", err).code, 1);
    EXPECT_NE(slurp(err).find("\"smiles\""), std::string::npos);
    EXPECT_EQ(run_cli("predict --checkpoint " + (dir_ / "missing.ckpt").string() + " --smiles CCO --sequence MK", err).code, 1);
    EXPECT_NE(slurp(err).find("\"runtime\""), std::string::npos);
}

TEST(CliStandalone, FeaturizeShape) {
    const auto r = run_cli("featurize --smiles 'CC(=O)O'");
    ASSERT_EQ(r.code, 0);
    const auto rows = lines(r.out);
    ASSERT_EQ(rows.size(), 4u);
    for (const auto& row : rows) EXPECT_EQ(std::count(row.begin(), row.end(), ','), 77);
    EXPECT_EQ(run_cli("featurize --smiles 'C(('").code, 1);
}

TEST(CliStandalone, FeaturizeDumpsNormalizedPowers) {
    const auto prefix = fs::temp_directory_path() / ("deepglstm_feat_" + std::to_string(::getpid()));
    ASSERT_EQ(run_cli("featurize --smiles CCC --dump-norm " + prefix.string()).code, 0);
    for (int k = 1; k <= 3; ++k) {
        const fs::path p = prefix.string() + "_A" + std::to_string(k) + ".csv";
        EXPECT_EQ(lines(slurp(p)).size(), 3u);
        fs::remove(p);
    }
}

TEST(CliStandalone, GradcheckPasses) {
    const auto r = run_cli("gradcheck --seed 1 --coordinates 60");
    EXPECT_EQ(r.code, 0);
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_TRUE(j["pass"].get<bool>());
    EXPECT_LT(j["max_relative_error"].get<double>(), 1e-4);
    EXPECT_GT(j["checked"].get<std::size_t>(), 0u);
}

TEST(CliStandalone, RankFromPredictions) {
    const auto dir = fs::temp_directory_path() / ("deepglstm_rank_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    std::ofstream(dir / "pred.csv") << "drug_id,protein_id,kiba_pred,pkd_pred\n"
                                       "a,P,10,8\nb,P,0,8\nc,P,5,4\nz,Q,1,9\n";
    const auto r = run_cli("rank --predictions " + (dir / "pred.csv").string() + " --protein-id P --top-k 2 --out " +
                           (dir / "scores.csv").string());
    ASSERT_EQ(r.code, 0);
    const auto table = lines(r.out);
    ASSERT_EQ(table.size(), 4u);
    EXPECT_EQ(table[0], "P");
    EXPECT_NE(table[2].find(" b "), std::string::npos);
    const auto csv = lines(slurp(dir / "scores.csv"));
    ASSERT_EQ(csv.size(), 5u);
    EXPECT_EQ(csv[0], "drug_id,protein_id,kiba_pred,pkd_pred,cb");
    // Scores are normalized over the whole file: z on Q (0.95) outranks b on P.
    EXPECT_EQ(csv[1].substr(0, 4), "z,Q,");
    EXPECT_EQ(csv[2].substr(0, 4), "b,P,");

    EXPECT_EQ(run_cli("rank --predictions " + (dir / "pred.csv").string() + " --protein-id R").code, 1);
    EXPECT_EQ(run_cli("rank").code, 2);
    fs::remove_all(dir);
}
