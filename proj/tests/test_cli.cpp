// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <memory>
#include <sstream>

#include "cli.hpp"
#include "test_util.hpp"

using namespace eep3dqa;

namespace {

struct CliRun {
  int code = -1;
  std::string out;
  std::string err;

  nlohmann::json json() const { return nlohmann::json::parse(out); }
};

CliRun run(std::vector<std::string> args) {
  std::ostringstream out, err;
  CliRun r;
  r.code = cli::run(std::move(args), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

// Small synthetic dataset shared by every CLI test: 3 shapes x 6 levels.
class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = std::make_unique<testutil::TempDir>("cli");
    const CliRun r = run({"make-synthetic", (dir_->path() / "data").string(), "--shapes", "3", "--levels", "6",
                          "--points", "2500"});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  static void TearDownTestSuite() { dir_.reset(); }

  static std::string dataset() { return (dir_->path() / "data" / "dataset.csv").string(); }
  static std::string model() { return (dir_->path() / "data" / "sphere_0_L0.ply").string(); }
  static std::string path(const std::string& name) { return (dir_->path() / name).string(); }

  static std::unique_ptr<testutil::TempDir> dir_;
};

std::unique_ptr<testutil::TempDir> Cli::dir_;

const std::vector<std::string> kFast = {"--viewport", "256", "--lr", "3e-3", "--epochs", "40"};

std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_F(Cli, RenderWritesSelectedViewpoints) {
  const std::string out = path("render");
  const CliRun r = run({"render", model(), "--viewpoints", "+X,+Z", "--out", out, "--seed", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* stem : {"pos_x", "pos_z"}) {
    EXPECT_TRUE(std::filesystem::exists(std::filesystem::path(out) / (std::string(stem) + ".png")));
    EXPECT_TRUE(std::filesystem::exists(std::filesystem::path(out) / (std::string(stem) + ".json")));
  }
  EXPECT_FALSE(std::filesystem::exists(std::filesystem::path(out) / "neg_x.png"));
  EXPECT_EQ(r.json()["outputs"].size(), 2u);
  EXPECT_EQ(r.json()["config"]["seed"], 1);
}

TEST_F(Cli, TrainScoreDeterministic) {
  const std::string weights = path("w_tiny.json");
  const CliRun t = run(with({"train", dataset(), "--out", weights, "--seed", "3", "--preset", "tiny"}, kFast));
  ASSERT_EQ(t.code, 0) << t.err;
  ASSERT_TRUE(std::filesystem::exists(weights));

  const auto args = with({"score", model(), "--preset", "tiny", "--weights", weights, "--seed", "7"}, kFast);
  const CliRun a = run(args), b = run(args);
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  const auto j = a.json();
  EXPECT_EQ(j["per_projection"].size(), 2u);
  EXPECT_EQ(j["viewpoints"].size(), 2u);
  EXPECT_EQ(j["config"]["preset"], "tiny");
  EXPECT_EQ(j["config"]["seed"], 7);
}

TEST_F(Cli, TrainDefaultsEchoed) {
  const CliRun t = run({"train", dataset(), "--out", path("w_default.json"), "--seed", "1", "--viewport", "256"});
  ASSERT_EQ(t.code, 0) << t.err;
  const auto cfg = t.json()["config"]["train"];
  EXPECT_EQ(cfg["batch_size"], 32);
  EXPECT_EQ(cfg["epochs"], 50);
  EXPECT_EQ(cfg["learning_rate"], 1e-4);
  EXPECT_EQ(t.json()["config"]["n_projections"], 5);
}

TEST_F(Cli, MissingWeightsExitTwo) {
  const CliRun r = run({"score", model(), "--weights", path("no_such_weights.json"), "--seed", "1"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("weights not found"), std::string::npos) << r.err;
  const CliRun none = run({"score", model(), "--seed", "1"});
  EXPECT_EQ(none.code, 2);
  EXPECT_NE(none.err.find("weights not found"), std::string::npos);
}

TEST_F(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run({"score", model(), "--bogus"}).code, 2);
  EXPECT_EQ(run({"score", model(), "--n", "9", "--weights", "x"}).code, 2);
  EXPECT_EQ(run({"score", model(), "--grid", "7x7"}).code, 2);
  EXPECT_EQ(run({"score", model(), "--preset", "huge"}).code, 2);
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"evaluate", path("nothing.csv"), "--seed", "1"}).code, 2);
}

TEST_F(Cli, PipelineErrorsExitOne) {
  const CliRun r = run({"render", path("missing.ply"), "--seed", "1"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("missing.ply"), std::string::npos);
}

TEST_F(Cli, SeedDrawnWhenAbsent) {
  const CliRun r = run({"render", model(), "--viewpoints", "+Y", "--out", path("r2"), "--viewport", "128"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("seed: "), std::string::npos);
  const std::string printed = r.err.substr(r.err.find("seed: ") + 6);
  EXPECT_EQ(std::to_string(r.json()["config"]["seed"].get<std::uint64_t>()), printed.substr(0, printed.find('\n')));
}

TEST_F(Cli, EvaluateEmitsReport) {
  const CliRun r = run(with({"evaluate", dataset(), "--seed", "2", "--preset", "tiny"}, kFast));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = r.json();
  for (const char* key : {"srcc", "plcc", "krcc", "rmse"}) EXPECT_TRUE(j["report"].contains(key)) << key;
  EXPECT_EQ(j["folds"].size(), 3u);  // one fold per reference shape by default
  EXPECT_EQ(j["protocol"], "3-fold");

  const CliRun table = run(with({"evaluate", dataset(), "--seed", "2", "--preset", "tiny", "--table"}, kFast));
  ASSERT_EQ(table.code, 0);
  EXPECT_NE(table.out.find("SRCC"), std::string::npos);
  EXPECT_NE(table.out.find("mean"), std::string::npos);
}

TEST_F(Cli, AblateDefaultRowMatchesEvaluate) {
  const auto common = with({"--seed", "4", "--preset", "tiny"}, kFast);
  const CliRun ev = run(with({"evaluate", dataset()}, common));
  const CliRun ab = run(with({"ablate", dataset(), "--rps", "on", "--gms", "on"}, common));
  ASSERT_EQ(ev.code, 0) << ev.err;
  ASSERT_EQ(ab.code, 0) << ab.err;
  const auto rows = ab.json()["rows"];
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0]["report"]["srcc"], ev.json()["report"]["srcc"]);
  EXPECT_EQ(rows[0]["report"]["plcc"], ev.json()["report"]["plcc"]);
}

TEST_F(Cli, AblateGrid) {
  EXPECT_EQ(run({"ablate", dataset(), "--rps", "off", "--seed", "1"}).code, 2);
  EXPECT_EQ(run({"ablate", dataset(), "--rps", "sometimes", "--seed", "1"}).code, 2);
  const CliRun r = run(with({"ablate", dataset(), "--rps", "both", "--gms", "both", "--fixed-viewpoints", "preset",
                             "--seed", "5", "--preset", "tiny"},
                            kFast));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = r.json()["rows"];
  ASSERT_EQ(rows.size(), 4u);
  for (const auto& row : rows) EXPECT_EQ(row["runs"], row["rps"].get<bool>() ? 1 : 5);
  const CliRun lists = run(with({"ablate", dataset(), "--rps", "off", "--gms", "off", "--fixed-viewpoints",
                                 "+X,+Y;-Z,+Z", "--seed", "5", "--preset", "tiny", "--table"},
                                kFast));
  ASSERT_EQ(lists.code, 0) << lists.err;
  EXPECT_NE(lists.out.find("RPS off, GMS off"), std::string::npos);
}

TEST_F(Cli, SweepCoversOneToSix) {
  const std::string out = path("sweep.json");
  const CliRun r = run(with({"sweep-n", dataset(), "--seed", "6", "--out", out}, kFast));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = r.json()["rows"];
  ASSERT_EQ(rows.size(), 6u);
  for (int n = 1; n <= 6; ++n) {
    EXPECT_EQ(rows[n - 1]["n"], n);
    EXPECT_TRUE(rows[n - 1]["srcc"].contains(dataset()));
  }
  EXPECT_TRUE(std::filesystem::exists(path("sweep.csv")));
}

TEST_F(Cli, BenchTable) {
  const CliRun r = run({"bench", model(), "--repeats", "3", "--seed", "1", "--viewport", "256", "--table"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("base *"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("1.00x"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("tiny"), std::string::npos) << r.out;
  EXPECT_EQ(run({"bench", model(), "--repeats", "2", "--seed", "1"}).code, 2);
}

TEST_F(Cli, AllSixViewpointsRenderedAtNSix) {
  PipelineConfig cfg;
  cfg.n_projections = 6;
  cfg.render.viewport = 128;
  const auto items = load_dataset_csv(dataset());
  RenderLog log;
  const auto feats = dataset_features(std::span<const DatasetItem>(items.data(), 2), cfg, &log);
  EXPECT_EQ(log.count(), 12u);
  for (const auto& f : feats) EXPECT_EQ(f.projections.size(), 6u);
}
