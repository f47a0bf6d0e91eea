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

#include "stu/config.h"

#include <gtest/gtest.h>

namespace stu {
namespace {

constexpr char kAdding[] = R"(# adding problem
seed = 4
task = adding
task.length = 30
unfold_steps = 30
learning_rate = 0.25
momentum = 0.9

[layer]
type = stu_lstm
in = 2
out = 16
untie_b = true

[layer]
type = linear
in = 16
out = 1
)";

// Expects a ConfigError on `line` whose message contains `needle`.
void ExpectError(const std::string& text, int line, const std::string& needle) {
  try {
    parse_config(text);
    ADD_FAILURE() << "expected ConfigError for:\n" << text;
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line(), line) << e.what();
    EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
  }
}

TEST(ParseConfigTest, ReadsEveryField) {
  const RunConfig c = parse_config(kAdding);
  EXPECT_EQ(c.train.seed, 4u);
  EXPECT_EQ(c.task.kind, TaskKind::kAdding);
  EXPECT_EQ(c.task.length, 30);
  EXPECT_EQ(c.train.unfold_steps, 30);
  EXPECT_EQ(c.train.learning_rate, 0.25);
  EXPECT_EQ(c.train.momentum, 0.9);
  ASSERT_EQ(c.layers.size(), 2u);
  EXPECT_EQ(c.layers[0].type, LayerType::kStuLstm);
  EXPECT_TRUE(c.layers[0].untie_b);
  EXPECT_FALSE(c.layers[0].untie_v);
  EXPECT_EQ(c.layers[1].type, LayerType::kLinear);
  EXPECT_TRUE(c.has_head());
}

TEST(ParseConfigTest, DefaultsWhenOmitted) {
  const RunConfig c = parse_config("[layer]\ntype = linear\nin = 2\nout = 1\n");
  EXPECT_EQ(c.train, TrainConfig{});
  EXPECT_EQ(c.task, TaskConfig{});
}

TEST(FormatConfigTest, RoundTrips) {
  const RunConfig c = parse_config(kAdding);
  const std::string text = FormatConfig(c);
  EXPECT_EQ(parse_config(text), c);
  EXPECT_EQ(FormatConfig(parse_config(text)), text);
}

TEST(FormatConfigTest, RoundTripsEveryLayerType) {
  const std::string text = R"(task = frames
task.dim = 6
task.classes = 3
task.noise = 0.3
[layer]
type = lstmp
in = 6
out = 8
proj = 4
[layer]
type = lstm
in = 4
out = 4
[layer]
type = dense
in = 4
out = 4
activation = sigmoid
[layer]
type = highway
in = 4
out = 4
carry = coupled
[layer]
type = stu_highway
in = 4
out = 4
activation = relu
[layer]
type = softmax
in = 4
out = 3
)";
  const RunConfig c = parse_config(text);
  EXPECT_EQ(parse_config(FormatConfig(c)), c);
}

TEST(ParseConfigTest, UnknownKeyNamesLine) {
  ExpectError("seed = 1\nlearning_rte = 0.1\n", 2, "learning_rte");
}

TEST(ParseConfigTest, MalformedValueNamesLine) {
  ExpectError("seed = 1\n\nlearning_rate = fast\n", 3, "learning_rate");
  ExpectError("max_epochs = 2.5\n", 1, "max_epochs");
}

TEST(ParseConfigTest, ZeroUnfoldStepsNamesField) {
  ExpectError("unfold_steps = 0\n", 1, "unfold_steps");
}

TEST(ParseConfigTest, DuplicateKey) {
  ExpectError("seed = 1\nseed = 2\n", 2, "seed");
}

TEST(ParseConfigTest, BrokenChainNamesBothLayers) {
  const std::string text =
      "[layer]\ntype = lstm\nin = 2\nout = 8\n"
      "[layer]\ntype = linear\nin = 6\nout = 1\n";
  try {
    parse_config(text);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_EQ(e.line(), 5);
    EXPECT_NE(msg.find("layer 0"), std::string::npos) << msg;
    EXPECT_NE(msg.find("layer 1"), std::string::npos) << msg;
  }
}

TEST(ParseConfigTest, HeadMustMatchTask) {
  ExpectError("task = frames\ntask.dim = 3\n[layer]\ntype = linear\nin = 3\nout = 1\n",
              3, "softmax");
  ExpectError("[layer]\ntype = linear\nin = 2\nout = 2\n", 1, "out");
}

TEST(ParseConfigTest, FirstLayerMustMatchTaskInput) {
  ExpectError("[layer]\ntype = lstm\nin = 3\nout = 1\n", 1, "in");
}

TEST(ParseConfigTest, KeysMustApplyToLayerType) {
  ExpectError("[layer]\ntype = lstm\nin = 2\nout = 2\nproj = 1\n", 5, "proj");
  ExpectError("[layer]\ntype = lstm\nin = 2\nout = 2\nuntie_v = true\n", 5,
              "untie_v");
}

TEST(ParseConfigTest, LayerNeedsTypeAndSizes) {
  ExpectError("[layer]\nin = 2\nout = 1\n", 1, "type");
  ExpectError("[layer]\ntype = bogus\nin = 2\nout = 1\n", 2, "bogus");
}

TEST(ParseConfigTest, RangeChecks) {
  ExpectError("momentum = 1\n", 1, "momentum");
  ExpectError("task.persistence = 1.5\n", 1, "task.persistence");
  ExpectError("weight_decay = -1\n", 1, "weight_decay");
  ExpectError("task.length = 1\n[layer]\ntype = linear\nin = 2\nout = 1\n", 1,
              "task.length");
}

TEST(ParseConfigTest, RequiresALayer) {
  try {
    parse_config("seed = 3\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("layer"), std::string::npos);
  }
}

TEST(MakeTaskDataTest, SplitsDifferAndRepeat) {
  TaskConfig t;
  t.train = 5;
  t.cv = 5;
  t.length = 6;
  const SequenceDataset a = MakeTaskData(t, 0);
  const SequenceDataset b = MakeTaskData(t, 1);
  EXPECT_EQ(a.inputs[0], MakeTaskData(t, 0).inputs[0]);
  EXPECT_NE(a.inputs[0], b.inputs[0]);
  EXPECT_THROW(MakeTaskData(t, 3), UsageError);
}

}  // namespace
}  // namespace stu
