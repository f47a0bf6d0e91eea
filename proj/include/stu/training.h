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

#ifndef STU_TRAINING_H_
#define STU_TRAINING_H_

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "stu/core.h"
#include "stu/model.h"
#include "stu/tasks.h"

namespace stu {

struct TrainConfig {
  Index unfold_steps = 20;
  Index minibatch = 800;  // frames per update
  double learning_rate = 0.1;
  double weight_decay = 0.0;
  double momentum = 0.0;
  int max_epochs = 20;
  double ramp_threshold = 0.005;
  double stop_threshold = 0.001;
  std::uint64_t seed = 1;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

enum class SchedulerPhase { kRamp = 0, kHalving = 1, kStopped = 2 };
enum class SchedulerAction { kContinue, kHalve, kStop };

// Learning-rate schedule state: hold the rate while the cross-validation
// loss improves by at least ramp_threshold (relative), then halve it every
// epoch until the improvement drops below stop_threshold.
struct SchedulerState {
  double lr = 0.0;
  double last_cv = std::numeric_limits<double>::quiet_NaN();
  SchedulerPhase phase = SchedulerPhase::kRamp;
  int epochs = 0;
};

SchedulerAction newbob_update(SchedulerState& state, double cv_metric,
                              const TrainConfig& config);

// Columns of the metrics log.
struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double cv_loss = 0.0;
  double lr = 0.0;
  double seconds = 0.0;
};

struct TrainState {
  Model model;
  Model velocity;
  SchedulerState scheduler;
  int epoch = 0;
  Rng rng;
  std::vector<EpochRecord> history;
};

// Builds the model from `specs` with Rng(config.seed).
TrainState InitTrainState(std::span<const LayerSpec> specs,
                          const TrainConfig& config);

struct ChunkResult {
  double loss = 0.0;
  Model grads;
};

// Forward and backward through one truncated window of exactly
// `unfold_steps` frames from zero state. Every gradient is that of the mean
// frame loss; recurrent-layer gradients are further divided by
// `unfold_steps`.
ChunkResult bptt_chunk(const Model& model, const SequenceBatch& chunk,
                       Index unfold_steps);

// p <- p - lr * v, v <- momentum * v + g + wd * p, with weight decay on
// weight and projection matrices only. Frozen tensors are left untouched.
void sgd_step(TrainState& state, const Model& grads, const TrainConfig& config);

struct GradCheckEntry {
  std::string name;
  Index checked = 0;  // coordinates compared
  double max_rel_err = 0.0;
  double mean_rel_err = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> tensors;  // worst first
  double max_rel_err() const {
    return tensors.empty() ? 0.0 : tensors.front().max_rel_err;
  }
};

struct GradCheckOptions {
  // Coordinates per tensor; 0 checks every coordinate.
  Index max_coords = 0;
  std::uint64_t seed = 0;
  // Relative errors use max(|analytic|, |numeric|, floor) as denominator.
  double floor = 1e-7;
};

// Central differences (L(p+eps) - L(p-eps)) / 2eps of the batch mean loss
// against its analytic gradient.
GradCheckReport finite_diff_check(const Model& model,
                                  const SequenceBatch& batch, double epsilon,
                                  const GradCheckOptions& options = {});

// As above, against caller-supplied analytic gradients of the mean loss.
GradCheckReport finite_diff_check(const Model& model,
                                  const SequenceBatch& batch, double epsilon,
                                  const Model& analytic,
                                  const GradCheckOptions& options = {});

// One pass over `train` in shuffled chunks; returns the mean frame loss.
double TrainEpoch(TrainState& state, const SequenceDataset& train,
                  const TrainConfig& config);

// Runs epochs until the scheduler stops or max_epochs is reached, calling
// `on_epoch` after each one with the updated state.
// Runs epochs until the scheduler stops or max_epochs is reached. After each
// epoch `on_epoch` (if set) sees the state; returning false ends training
// early without touching the scheduler.
void Train(TrainState& state, const SequenceDataset& train,
           const SequenceDataset& cv, const TrainConfig& config,
           bool time_epochs,
           const std::function<bool(const TrainState&)>& on_epoch);

}  // namespace stu

#endif  // STU_TRAINING_H_
