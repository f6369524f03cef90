#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "confadapt/cli.hpp"
#include "support.hpp"

using namespace confadapt;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "confadapt");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class Cli : public ::testing::Test {
 protected:
  fs::path dir;

  void SetUp() override {
    dir = fs::temp_directory_path() / ("confadapt_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }

  std::string p(const std::string& name) const { return (dir / name).string(); }

  void small_study(const std::string& name, int participants = 6) {
    auto r = run({"simulate", "--n-participants", std::to_string(participants), "--seed", "3", "--out", p(name)});
    ASSERT_EQ(r.code, 0) << r.err;
  }

  nlohmann::json manifest(const std::string& path) const { return nlohmann::json::parse(io::read_file(path)); }
};

}  // namespace

TEST_F(Cli, LabelHappyPath) {
  small_study("d.jsonl");
  auto r = run({"label", "--input", p("d.jsonl"), "--t-high", "0.7", "--t-change", "0.05", "--out", p("labels.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto labels = io::read_labels(p("labels.csv"));
  EXPECT_EQ(labels.size(), 66u);
  const auto m = manifest(p("labels.csv") + ".manifest.json");
  EXPECT_EQ(m["subcommand"], "label");
  EXPECT_EQ(m["config"]["t_high"]["source"], "flag");
  EXPECT_EQ(m["inputs"][0]["sha256"].get<std::string>().size(), 64u);
  EXPECT_EQ(m["outputs"][0]["sha256"], cli::file_digest(p("labels.csv")));
}

TEST_F(Cli, UnknownFlagIsUsageError) {
  auto r = run({"label", "--bogus", "1"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"frobnicate"}).code, 1);
}

TEST_F(Cli, MissingRequiredPathIsUsageError) {
  auto r = run({"label", "--out", p("x.csv")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("--input"), std::string::npos);
}

TEST_F(Cli, HelpSucceeds) {
  auto r = run({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("simulate"), std::string::npos);
}

TEST_F(Cli, InvalidDatasetListsFirstTenViolations) {
  std::string text;
  for (int i = 1; i <= 4; ++i)
    for (int o = 1; o <= 3; ++o) {
      auto ep = fixtures::episode("P01", i, o, Action::Pick, ExplanationLevel::High);
      ep.observations[Phase::Failure].gaze = {0.5, 0.5, 0.5};
      text += io::encode_episode(ep) + "\n";
    }
  io::write_file(p("bad.jsonl"), text);
  auto r = run({"label", "--input", p("bad.jsonl"), "--out", p("labels.csv")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("12 violation"), std::string::npos);
  EXPECT_NE(r.err.find("line 10: gaze sum 1.5"), std::string::npos);
  EXPECT_EQ(r.err.find("line 11: gaze sum"), std::string::npos);
  EXPECT_NE(r.err.find("2 more"), std::string::npos);
  EXPECT_FALSE(fs::exists(p("labels.csv")));

  // Lenient mode drops the episodes instead.
  r = run({"label", "--input", p("bad.jsonl"), "--strict", "false", "--out", p("labels.csv")});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("warning"), std::string::npos);
}

TEST_F(Cli, ParseErrorIsDataError) {
  io::write_file(p("bad.jsonl"), "{\"participant_id\": 3}\n");
  EXPECT_EQ(run({"label", "--input", p("bad.jsonl"), "--out", p("l.csv")}).code, 2);
  EXPECT_EQ(run({"label", "--input", p("missing.jsonl"), "--out", p("l.csv")}).code, 2);
}

TEST_F(Cli, ConfigPrecedence) {
  small_study("d.jsonl");
  io::write_file(p("cfg.txt"), "# thresholds\nt_high = 0.6\nt_change = 0.2\n");
  auto r = run({"label", "--config", p("cfg.txt"), "--t-change", "0.07", "--input", p("d.jsonl"), "--out", p("l.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto m = manifest(p("l.csv") + ".manifest.json");
  EXPECT_EQ(m["config"]["t_high"]["value"], "0.6");
  EXPECT_EQ(m["config"]["t_high"]["source"], "config");
  EXPECT_EQ(m["config"]["t_change"]["value"], "0.07");
  EXPECT_EQ(m["config"]["t_change"]["source"], "flag");
  EXPECT_EQ(m["config"]["strict"]["source"], "default");
}

TEST_F(Cli, BadConfigIsUsageError) {
  io::write_file(p("cfg.txt"), "t_hgih = 0.6\n");
  EXPECT_EQ(run({"simulate", "--config", p("cfg.txt"), "--out", p("d.jsonl")}).code, 1);
  EXPECT_EQ(run({"simulate", "--noise-sigma", "abc", "--out", p("d.jsonl")}).code, 1);
  EXPECT_EQ(run({"simulate", "--n-participants", "0", "--out", p("d.jsonl")}).code, 1);
  EXPECT_EQ(run({"replay", "--e-min", "High", "--e-max", "Low", "--input", "a", "--labels", "b", "--model", "c",
                 "--out", p("r.csv")})
                .code,
            1);
}

TEST_F(Cli, RefusesToOverwriteInputs) {
  small_study("d.jsonl");
  const auto before = io::read_file(p("d.jsonl"));
  EXPECT_EQ(run({"label", "--input", p("d.jsonl"), "--out", p("d.jsonl")}).code, 1);
  EXPECT_EQ(io::read_file(p("d.jsonl")), before);
}

TEST_F(Cli, FullPipeline) {
  small_study("d.jsonl", 8);
  ASSERT_EQ(run({"label", "--input", p("d.jsonl"), "--out", p("labels.csv")}).code, 0);
  ASSERT_EQ(run({"featurize", "--input", p("d.jsonl"), "--labels", p("labels.csv"), "--out", p("f.csv")}).code, 0);
  auto r = run({"train", "--features", p("f.csv"), "--n-trees", "10", "--out", p("model.txt")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("cv_accuracy"), std::string::npos);
  EXPECT_TRUE(fs::exists(p("model.cv.csv")));
  ASSERT_EQ(run({"evaluate", "--model", p("model.txt"), "--features", p("f.csv"), "--out", p("eval.csv")}).code, 0);
  r = run({"replay", "--input", p("d.jsonl"), "--labels", p("labels.csv"), "--model", p("model.txt"), "--out",
           p("replay.csv"), "--table-mode", "goodness-of-fit"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(p("replay.hypotheses.csv")));
  EXPECT_TRUE(fs::exists(p("replay.totals.csv")));
  r = run({"report", "--input", p("d.jsonl"), "--labels", p("labels.csv"), "--group-by", "action", "--round", "1",
           "--replay", p("replay.csv"), "--table-mode", "goodness-of-fit", "--out", p("breakdown.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto breakdown = io::Table::parse(io::read_file(p("breakdown.csv")), "breakdown");
  EXPECT_EQ(breakdown.rows.size(), 3u);
  EXPECT_EQ(io::read_file(p("breakdown.hypotheses.csv")), io::read_file(p("replay.hypotheses.csv")));

  const auto eval = io::Table::parse(io::read_file(p("eval.csv")), "eval");
  EXPECT_EQ(eval.rows.size(), 9u);
  EXPECT_EQ(eval.rows.back()[0], "all");
}

TEST_F(Cli, TrainWithGrid) {
  small_study("d.jsonl", 5);
  ASSERT_EQ(run({"label", "--input", p("d.jsonl"), "--out", p("labels.csv")}).code, 0);
  ASSERT_EQ(run({"featurize", "--input", p("d.jsonl"), "--labels", p("labels.csv"), "--out", p("f.csv")}).code, 0);
  auto r = run({"train", "--features", p("f.csv"), "--labels", p("labels.csv"), "--n-trees", "5", "--grid-max-depth",
                "2,6", "--grid-report", p("grid.csv"), "--out", p("m.txt")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(io::Table::parse(io::read_file(p("grid.csv")), "grid").rows.size(), 2u);
}

TEST_F(Cli, CorruptModelIsDataError) {
  small_study("d.jsonl");
  ASSERT_EQ(run({"label", "--input", p("d.jsonl"), "--out", p("labels.csv")}).code, 0);
  ASSERT_EQ(run({"featurize", "--input", p("d.jsonl"), "--labels", p("labels.csv"), "--out", p("f.csv")}).code, 0);
  io::write_file(p("m.txt"), "CONFADAPT-FOREST\nschema_version 1\n");
  EXPECT_EQ(run({"evaluate", "--model", p("m.txt"), "--features", p("f.csv"), "--out", p("e.csv")}).code, 2);
}

TEST_F(Cli, EndToEndTwoParticipants) {
  io::write_file(p("cfg.txt"), "n_participants = 2\nn_trees = 10\nnoise_sigma = 0\n");
  auto r = run({"report", "--end-to-end", "--config", p("cfg.txt"), "--out-dir", p("e2e")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("cv_folds,2\n"), std::string::npos);
  EXPECT_NE(r.out.find("labeler_agreement,1\n"), std::string::npos);
  EXPECT_NE(r.out.find("H1_verdict"), std::string::npos);
  EXPECT_TRUE(fs::exists(p("e2e/manifest.json")));
  EXPECT_EQ(manifest(p("e2e/manifest.json"))["outputs"].size(), 10u);
}

TEST_F(Cli, RerunsAreByteIdentical) {
  for (const char* name : {"a.jsonl", "b.jsonl"}) small_study(name);
  EXPECT_EQ(io::read_file(p("a.jsonl")), io::read_file(p("b.jsonl")));
  const auto ma = manifest(p("a.jsonl") + ".manifest.json"), mb = manifest(p("b.jsonl") + ".manifest.json");
  EXPECT_EQ(ma["outputs"][0]["sha256"], mb["outputs"][0]["sha256"]);
  EXPECT_EQ(ma["config"], mb["config"]);
}

TEST(CliBinary, ExitCodes) {
  const std::string tool = CONFADAPT_TOOL;
  int status = std::system((tool + " --definitely-not-a-flag >/dev/null 2>&1").c_str());
  EXPECT_EQ(WEXITSTATUS(status), 1);
  status = std::system((tool + " --version >/dev/null 2>&1").c_str());
  EXPECT_EQ(WEXITSTATUS(status), 0);
}

TEST(Digest, KnownVector) {
  EXPECT_EQ(cli::sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
