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

#include "stu/training.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace stu {

SchedulerAction newbob_update(SchedulerState& s, double cv,
                              const TrainConfig& config) {
  if (!std::isfinite(cv)) {
    throw NumericError("newbob_update: cross-validation metric is not finite");
  }
  ++s.epochs;
  if (s.phase == SchedulerPhase::kStopped) return SchedulerAction::kStop;
  const bool first = std::isnan(s.last_cv);
  const double improvement =
      first ? std::numeric_limits<double>::infinity()
            : (s.last_cv - cv) / std::max(std::abs(s.last_cv), 1e-300);
  s.last_cv = cv;

  SchedulerAction action = SchedulerAction::kContinue;
  if (s.phase == SchedulerPhase::kRamp) {
    if (improvement < config.ramp_threshold) {
      s.phase = SchedulerPhase::kHalving;
      action = SchedulerAction::kHalve;
    }
  } else if (improvement < config.stop_threshold) {
    action = SchedulerAction::kStop;
  } else {
    action = SchedulerAction::kHalve;
  }
  if (action != SchedulerAction::kStop && s.epochs >= config.max_epochs) {
    action = SchedulerAction::kStop;
  }
  if (action == SchedulerAction::kHalve) s.lr *= 0.5;
  if (action == SchedulerAction::kStop) s.phase = SchedulerPhase::kStopped;
  return action;
}

TrainState InitTrainState(std::span<const LayerSpec> specs,
                          const TrainConfig& config) {
  TrainState state;
  state.rng = Rng(config.seed);
  state.model = BuildModel(specs, state.rng);
  state.velocity = ZerosLike(state.model);
  state.scheduler.lr = config.learning_rate;
  return state;
}

ChunkResult bptt_chunk(const Model& model, const SequenceBatch& chunk,
                       Index unfold_steps) {
  if (unfold_steps < 1) throw UsageError("bptt_chunk: unfold_steps must be >= 1");
  if (chunk.steps() != unfold_steps) {
    throw UsageError("bptt_chunk: chunk has " + std::to_string(chunk.steps()) +
                     " steps, expected " + std::to_string(unfold_steps));
  }
  ChunkResult out;
  out.grads = ZerosLike(model);
  const BatchStats stats = RunBatch(model, chunk, &out.grads);
  for (std::size_t t = 0; t < stats.step_loss.size(); ++t) {
    if (!std::isfinite(stats.step_loss[t])) {
      throw NumericError("bptt_chunk: non-finite loss at step " +
                         std::to_string(t));
    }
  }
  out.loss = stats.mean_loss();
  const double inv = 1.0 / static_cast<double>(unfold_steps);
  ForEachParam(out.grads, [&](const std::string&, Tensor& g, ParamRole, bool,
                              bool recurrent) {
    if (recurrent) g *= inv;
  });
  return out;
}

void sgd_step(TrainState& state, const Model& grads, const TrainConfig& config) {
  std::vector<ParamRef> params = CollectParams(state.model);
  std::vector<ParamRef> velocity = CollectParams(state.velocity);
  std::vector<const Tensor*> g;
  ForEachParam(grads, [&](const std::string&, const Tensor& t, ParamRole, bool,
                          bool) { g.push_back(&t); });
  if (g.size() != params.size()) {
    throw ConsistencyError("sgd_step: gradients do not mirror the model");
  }
  const double lr = state.scheduler.lr;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const ParamRef& p = params[k];
    if (!p.trainable) continue;
    CheckSameShape(*p.value, *g[k], "sgd_step");
    Tensor& v = *velocity[k].value;
    const bool decay =
        p.role == ParamRole::kWeight || p.role == ParamRole::kProjection;
    if (config.momentum != 0.0) {
      v *= config.momentum;
    } else {
      v.setZero();
    }
    v += *g[k];
    if (decay && config.weight_decay != 0.0) {
      v += config.weight_decay * *p.value;
    }
    *p.value -= lr * v;
  }
}

namespace {

struct Coordinate {
  std::size_t tensor;
  Index index;
};

double MeanLoss(const Model& model, const SequenceBatch& batch) {
  return RunBatch(model, batch, nullptr).mean_loss();
}

}  // namespace

GradCheckReport finite_diff_check(const Model& model,
                                  const SequenceBatch& batch, double epsilon,
                                  const GradCheckOptions& options) {
  Model analytic = ZerosLike(model);
  RunBatch(model, batch, &analytic);
  return finite_diff_check(model, batch, epsilon, analytic, options);
}

GradCheckReport finite_diff_check(const Model& model,
                                  const SequenceBatch& batch, double epsilon,
                                  const Model& analytic,
                                  const GradCheckOptions& options) {
  if (!(epsilon > 0.0)) {
    throw UsageError("finite_diff_check: epsilon must be positive");
  }
  Model probe = model;
  std::vector<ParamRef> params = CollectParams(probe);
  std::vector<const Tensor*> grads;
  ForEachParam(analytic, [&](const std::string&, const Tensor& t, ParamRole,
                             bool, bool) { grads.push_back(&t); });
  if (grads.size() != params.size()) {
    throw ConsistencyError("finite_diff_check: gradients do not mirror model");
  }
  Rng rng(options.seed);
  GradCheckReport report;
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (!params[k].trainable) continue;
    Tensor& value = *params[k].value;
    std::vector<Index> coords(value.size());
    for (Index i = 0; i < value.size(); ++i) coords[i] = i;
    if (options.max_coords > 0 &&
        static_cast<Index>(coords.size()) > options.max_coords) {
      // Partial Fisher-Yates: a uniform sample of max_coords indices.
      for (Index i = 0; i < options.max_coords; ++i) {
        const Index j =
            i + static_cast<Index>(rng.Below(coords.size() - i));
        std::swap(coords[i], coords[j]);
      }
      coords.resize(options.max_coords);
    }
    GradCheckEntry entry;
    entry.name = params[k].name;
    double sum = 0.0;
    for (Index i : coords) {
      double& x = value.data()[i];
      const double saved = x;
      x = saved + epsilon;
      const double plus = MeanLoss(probe, batch);
      x = saved - epsilon;
      const double minus = MeanLoss(probe, batch);
      x = saved;
      const double numeric = (plus - minus) / (2.0 * epsilon);
      const double a = grads[k]->data()[i];
      const double denom =
          std::max({std::abs(a), std::abs(numeric), options.floor});
      const double rel = std::abs(a - numeric) / denom;
      entry.max_rel_err = std::max(entry.max_rel_err, rel);
      sum += rel;
      ++entry.checked;
    }
    entry.mean_rel_err = entry.checked > 0 ? sum / entry.checked : 0.0;
    report.tensors.push_back(std::move(entry));
  }
  std::stable_sort(report.tensors.begin(), report.tensors.end(),
                   [](const GradCheckEntry& a, const GradCheckEntry& b) {
                     return a.max_rel_err > b.max_rel_err;
                   });
  return report;
}

double TrainEpoch(TrainState& state, const SequenceDataset& train,
                  const TrainConfig& config) {
  std::vector<ChunkRef> chunks = MakeChunks(train, config.unfold_steps);
  for (std::size_t i = chunks.size(); i > 1; --i) {
    std::swap(chunks[i - 1], chunks[state.rng.Below(i)]);
  }
  const std::size_t per_batch = static_cast<std::size_t>(
      std::max<Index>(1, config.minibatch / config.unfold_steps));
  double loss_sum = 0.0;
  double weight = 0.0;
  for (std::size_t begin = 0; begin < chunks.size(); begin += per_batch) {
    const std::size_t end = std::min(chunks.size(), begin + per_batch);
    const SequenceBatch batch =
        BuildBatch(train, std::span(chunks).subspan(begin, end - begin),
                   config.unfold_steps);
    const double frames = batch.weights.sum();
    if (frames == 0) continue;
    const ChunkResult r = bptt_chunk(state.model, batch, config.unfold_steps);
    sgd_step(state, r.grads, config);
    loss_sum += r.loss * frames;
    weight += frames;
  }
  return weight > 0 ? loss_sum / weight : 0.0;
}

void Train(TrainState& state, const SequenceDataset& train,
           const SequenceDataset& cv, const TrainConfig& config,
           bool time_epochs,
           const std::function<bool(const TrainState&)>& on_epoch) {
  while (state.epoch < config.max_epochs &&
         state.scheduler.phase != SchedulerPhase::kStopped) {
    const auto start = std::chrono::steady_clock::now();
    EpochRecord rec;
    rec.epoch = state.epoch + 1;
    rec.lr = state.scheduler.lr;
    rec.train_loss = TrainEpoch(state, train, config);
    rec.cv_loss = evaluate(state.model, cv).loss;
    if (time_epochs) {
      rec.seconds = std::chrono::duration<double>(
                        std::chrono::steady_clock::now() - start)
                        .count();
    }
    newbob_update(state.scheduler, rec.cv_loss, config);
    state.epoch = rec.epoch;
    state.history.push_back(rec);
    if (on_epoch && !on_epoch(state)) return;
  }
}

}  // namespace stu
