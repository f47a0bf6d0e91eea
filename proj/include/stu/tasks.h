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

// Synthetic sequence tasks and their metrics.

#ifndef STU_TASKS_H_
#define STU_TASKS_H_

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "stu/core.h"
#include "stu/model.h"

namespace stu {

enum class TaskKind { kAdding, kFrameClassification };

const char* TaskKindName(TaskKind kind);

struct SequenceDataset {
  TaskKind kind = TaskKind::kAdding;
  Index input_dim = 0;
  Index num_classes = 0;  // 0 for regression
  std::vector<Tensor> inputs;                // per sequence, T x input_dim
  std::vector<std::vector<double>> targets;  // per frame; NaN means none
  std::string provenance;

  std::size_t size() const { return inputs.size(); }
  Index frames() const;
};

// n sequences of length T. Channel 0 is uniform on [0, 1); channel 1 marks
// one position in the first half and one in the second half. The target,
// the sum of the two marked values, sits on the last frame.
SequenceDataset gen_adding(Index n, Index length, std::uint64_t seed);

struct FrameTaskOptions {
  double noise = 1.0;           // std. dev. of the Gaussian around each mean
  double persistence = 0.9;     // probability a label repeats on the next frame
  Index sequence_length = 100;  // frames per sequence
};

// n frames split into sequences of `sequence_length`. Labels follow a Markov
// chain that keeps its class with probability `persistence`; each frame is
// its class mean (a random +-1 vector) plus Gaussian noise.
SequenceDataset gen_frame_classification(Index n, Index dim, Index classes,
                                         std::uint64_t seed,
                                         const FrameTaskOptions& options = {});

struct Metrics {
  double loss = 0.0;
  double accuracy = 0.0;  // classification only
  double mse = 0.0;       // regression only
  Index frames = 0;

  friend bool operator==(const Metrics&, const Metrics&) = default;
};

// Mean loss and task metric over every target frame. Sequences run from
// zero state without truncation.
Metrics evaluate(const Model& model, const SequenceDataset& data);

// A window of `steps` frames starting at `start` in sequence `sequence`.
struct ChunkRef {
  std::size_t sequence;
  Index start;
};

// Cuts each sequence into consecutive windows of `steps`; the last window
// of a sequence may run past its end and is padded.
std::vector<ChunkRef> MakeChunks(const SequenceDataset& data, Index steps);

// Time-major batch; padded frames are zero with zero weight.
SequenceBatch BuildBatch(const SequenceDataset& data,
                         std::span<const ChunkRef> chunks, Index steps);

// One frame per row: sequence,step,x0..x{X-1},target (empty when absent).
void WriteDatasetCsv(const SequenceDataset& data, std::ostream& out);
SequenceDataset ReadDatasetCsv(std::istream& in, TaskKind kind,
                               Index num_classes);

}  // namespace stu

#endif  // STU_TASKS_H_
