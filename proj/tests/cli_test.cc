// Copyright 2026 The STU Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "stu/cli.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

namespace stu {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result Invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_command(args, out, err);
  return {code, out.str(), err.str()};
}

std::string Slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("stu_cli_test_" +
            std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  // Small adding-problem run writing into `out`.
  std::string WriteConfig(const std::string& name, const std::string& out,
                          const std::string& layer_type = "stu_lstm") {
    const fs::path path = dir_ / name;
    std::ofstream f(path);
    f << "seed = 5\ndata_seed = 2\ntask = adding\ntask.length = 8\n"
         "task.train = 40\ntask.cv = 10\ntask.test = 10\nunfold_steps = 8\n"
         "minibatch = 80\nlearning_rate = 0.2\nmomentum = 0.5\nmax_epochs = 4\n"
         "ramp_threshold = -1\nstop_threshold = -1\n"
      << "output_dir = " << (dir_ / out).string() << "\n\n[layer]\ntype = "
      << layer_type << "\nin = 2\nout = 6\n\n[layer]\ntype = linear\nin = 6\nout = 1\n";
    return path.string();
  }

  fs::path dir_;
};

TEST(SpearmanTest, Examples) {
  const std::vector<double> a = {1, 2, 3, 4};
  const std::vector<double> up = {10, 20, 30, 40};
  const std::vector<double> down = {4, 3, 2, 1};
  EXPECT_DOUBLE_EQ(Spearman(a, up), 1.0);
  EXPECT_DOUBLE_EQ(Spearman(a, down), -1.0);
  // Ties take the average rank: ranks (1.5, 1.5, 3) against (1, 2, 3).
  const std::vector<double> tied = {5, 5, 7};
  const std::vector<double> line = {1, 2, 3};
  EXPECT_NEAR(Spearman(tied, line), std::sqrt(0.75), 1e-15);
  EXPECT_TRUE(std::isnan(Spearman(line, std::vector<double>{2, 2, 2})));
  EXPECT_THROW(Spearman(a, line), DimensionError);
  EXPECT_THROW(Spearman(std::vector<double>{1}, std::vector<double>{1}), UsageError);
}

TEST_F(CliTest, CountParamsPrintsTotals) {
  const fs::path path = dir_ / "big.cfg";
  std::ofstream(path) << "task = frames\ntask.classes = 3\n[layer]\ntype = stu_lstm\n"
                         "in = 80\nout = 500\n[layer]\ntype = softmax\nin = 500\nout = 3\n";
  const Result r = Invoke({"count-params", "--config", path.string()});
  EXPECT_EQ(r.code, 0) << r.err;
  const std::size_t hidden = r.out.find("hidden_total ");
  ASSERT_NE(hidden, std::string::npos) << r.out;
  EXPECT_EQ(r.out.substr(hidden, r.out.find('\n', hidden) - hidden).rfind(" total=295000"),
            r.out.find('\n', hidden) - hidden - 13)
      << r.out;
  EXPECT_NE(r.out.find("layer0 stu_lstm"), std::string::npos) << r.out;
}

TEST_F(CliTest, GradCheckPasses) {
  const Result r = Invoke({"grad-check", "--config", WriteConfig("g.cfg", "g")});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  EXPECT_NE(r.out.find("PASS"), std::string::npos) << r.out;
}

TEST_F(CliTest, TrainWritesArtifactsAndEvalReadsThem) {
  const Result r = Invoke({"train", "--config", WriteConfig("a.cfg", "a")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("test loss="), std::string::npos) << r.out;
  for (const char* f : {"metrics.csv", "resolved.cfg", "last.ckpt", "epoch_4.ckpt"}) {
    EXPECT_TRUE(fs::exists(dir_ / "a" / f)) << f;
  }
  const std::string metrics = Slurp(dir_ / "a" / "metrics.csv");
  EXPECT_EQ(metrics.rfind("epoch,train_loss,cv_loss,lr,seconds\n", 0), 0u);
  EXPECT_EQ(std::count(metrics.begin(), metrics.end(), '\n'), 5);

  const Result e = Invoke({"eval", "--checkpoint", (dir_ / "a" / "last.ckpt").string(),
                        "--task", "test"});
  EXPECT_EQ(e.code, 0) << e.err;
  EXPECT_NE(e.out.find("mse="), std::string::npos) << e.out;
}

TEST_F(CliTest, IdenticalRunsGiveByteIdenticalMetrics) {
  ASSERT_EQ(Invoke({"train", "--config", WriteConfig("a.cfg", "a")}).code, 0);
  ASSERT_EQ(Invoke({"train", "--config", WriteConfig("b.cfg", "b")}).code, 0);
  EXPECT_EQ(Slurp(dir_ / "a" / "metrics.csv"), Slurp(dir_ / "b" / "metrics.csv"));
  EXPECT_EQ(Slurp(dir_ / "a" / "last.ckpt").size(),
            Slurp(dir_ / "b" / "last.ckpt").size());
}

TEST_F(CliTest, ResumeMatchesUninterruptedRun) {
  ASSERT_EQ(Invoke({"train", "--config", WriteConfig("full.cfg", "full")}).code, 0);
  const std::string cfg = WriteConfig("part.cfg", "part");
  const Result stop = Invoke({"train", "--config", cfg, "--stop-after", "2"});
  ASSERT_EQ(stop.code, 0) << stop.err;
  EXPECT_FALSE(fs::exists(dir_ / "part" / "epoch_3.ckpt"));
  const Result resume = Invoke({"train", "--config", cfg, "--resume",
                             (dir_ / "part" / "epoch_2.ckpt").string()});
  ASSERT_EQ(resume.code, 0) << resume.err;
  EXPECT_EQ(Slurp(dir_ / "full" / "metrics.csv"), Slurp(dir_ / "part" / "metrics.csv"));
}

TEST_F(CliTest, ResumeWithDifferentModelIsRejected) {
  ASSERT_EQ(Invoke({"train", "--config", WriteConfig("a.cfg", "a"), "--stop-after", "1"}).code,
            0);
  const Result r = Invoke({"train", "--config", WriteConfig("b.cfg", "b", "lstm"), "--resume",
                        (dir_ / "a" / "epoch_1.ckpt").string()});
  EXPECT_NE(r.code, 0);
  EXPECT_EQ(r.err.rfind("error: ", 0), 0u) << r.err;
}

TEST_F(CliTest, GateProfileIsSortedByInputGate) {
  ASSERT_EQ(Invoke({"train", "--config", WriteConfig("a.cfg", "a")}).code, 0);
  const fs::path csv = dir_ / "profile.csv";
  const Result r = Invoke({"gate-profile", "--checkpoint", (dir_ / "a" / "last.ckpt").string(),
                        "--out", csv.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("spearman(input_gate,forget_gate)="), std::string::npos) << r.err;
  std::istringstream in(Slurp(csv));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "unit,input_gate,forget_gate,candidate");
  double prev = INFINITY;
  int rows = 0;
  while (std::getline(in, line)) {
    const std::size_t a = line.find(',');
    const double input = std::stod(line.substr(a + 1));
    EXPECT_LE(input, prev);
    prev = input;
    ++rows;
  }
  EXPECT_EQ(rows, 6);
}

TEST_F(CliTest, GateProfileNeedsSemiTiedLayer) {
  ASSERT_EQ(Invoke({"train", "--config", WriteConfig("a.cfg", "a", "lstm")}).code, 0);
  const Result r = Invoke({"gate-profile", "--checkpoint", (dir_ / "a" / "last.ckpt").string()});
  EXPECT_NE(r.code, 0);
}

TEST_F(CliTest, ConfigErrorIsOneLine) {
  const fs::path path = dir_ / "bad.cfg";
  std::ofstream(path) << "seed = 1\nbogus = 2\n";
  const Result r = Invoke({"train", "--config", path.string()});
  EXPECT_NE(r.code, 0);
  EXPECT_EQ(r.err, "error: config: line 2: unknown key 'bogus'\n");
}

TEST_F(CliTest, CorruptCheckpointIsReported) {
  const fs::path path = dir_ / "junk.ckpt";
  std::ofstream(path) << "not a checkpoint";
  const Result r = Invoke({"eval", "--checkpoint", path.string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.err.rfind("error: checkpoint-", 0), 0u) << r.err;
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(Invoke({}).code, 2);
  EXPECT_EQ(Invoke({"frobnicate"}).code, 2);
  EXPECT_EQ(Invoke({"train"}).code, 2);
  EXPECT_EQ(Invoke({"--help"}).code, 0);
}

TEST_F(CliTest, GenDataWritesCsv) {
  const fs::path csv = dir_ / "data.csv";
  const Result r = Invoke({"gen-data", "--config", WriteConfig("a.cfg", "a"), "--split",
                        "cv", "--out", csv.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string text = Slurp(csv);
  // 10 sequences of 8 frames plus a header.
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 81);
}

}  // namespace
}  // namespace stu
