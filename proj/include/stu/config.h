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

// Run configuration: flat `key = value` lines, `#` comments, and one
// `[layer]` section per layer in input-to-output order. Example:
//
//   task = adding
//   task.length = 50
//   unfold_steps = 50
//   learning_rate = 0.5
//
//   [layer]
//   type = stu_lstm
//   in = 2
//   out = 32
//
//   [layer]
//   type = linear
//   in = 32
//   out = 1

#ifndef STU_CONFIG_H_
#define STU_CONFIG_H_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "stu/layer_spec.h"
#include "stu/tasks.h"
#include "stu/training.h"

namespace stu {

class ConfigError : public std::invalid_argument {
 public:
  ConfigError(int line, const std::string& message)
      : std::invalid_argument("line " + std::to_string(line) + ": " + message),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

struct TaskConfig {
  TaskKind kind = TaskKind::kAdding;
  // Adding: sequence length T. Frames: frames per sequence.
  Index length = 50;
  // Adding: sequences per split. Frames: frames per split.
  Index train = 1000;
  Index cv = 200;
  Index test = 200;
  Index dim = 80;      // frames only
  Index classes = 4;   // frames only
  double noise = 1.0;  // frames only
  double persistence = 0.9;
  std::uint64_t data_seed = 1;

  Index input_dim() const { return kind == TaskKind::kAdding ? 2 : dim; }
  friend bool operator==(const TaskConfig&, const TaskConfig&) = default;
};

struct RunConfig {
  std::vector<LayerSpec> layers;
  TaskConfig task;
  TrainConfig train;
  std::string output_dir = ".";
  bool log_wall_time = false;  // wall-clock seconds in metrics.csv

  bool has_head() const { return !layers.empty() && IsHead(layers.back().type); }
  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

// Parses and validates; unknown keys, malformed values and broken
// dimension chains raise ConfigError naming the line.
RunConfig parse_config(const std::string& text);

// Normalised form: every key spelled out in a fixed order. Parsing the
// result yields an equal RunConfig.
std::string FormatConfig(const RunConfig& config);

// Split 0 = train, 1 = cv, 2 = test; seeds derive from data_seed.
SequenceDataset MakeTaskData(const TaskConfig& task, int split);

}  // namespace stu

#endif  // STU_CONFIG_H_
