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

#include "stu/tasks.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace stu {

namespace {

constexpr double kNoTarget = std::numeric_limits<double>::quiet_NaN();
constexpr Index kEvalBatch = 64;

std::string FormatDouble(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

const char* TaskKindName(TaskKind kind) {
  return kind == TaskKind::kAdding ? "adding" : "frames";
}

Index SequenceDataset::frames() const {
  Index n = 0;
  for (const auto& x : inputs) n += x.rows();
  return n;
}

SequenceDataset gen_adding(Index n, Index length, std::uint64_t seed) {
  if (length < 2) {
    throw UsageError("gen_adding: sequence length must be at least 2, got " +
                     std::to_string(length));
  }
  if (n < 0) throw UsageError("gen_adding: negative sequence count");
  Rng rng(seed);
  SequenceDataset ds;
  ds.kind = TaskKind::kAdding;
  ds.input_dim = 2;
  ds.provenance = "adding n=" + std::to_string(n) +
                  " length=" + std::to_string(length) +
                  " seed=" + std::to_string(seed);
  const Index half = length / 2;
  for (Index s = 0; s < n; ++s) {
    Tensor x = Tensor::Zero(length, 2);
    for (Index t = 0; t < length; ++t) x(t, 0) = rng.Uniform();
    const Index first = static_cast<Index>(rng.Below(half));
    const Index second = half + static_cast<Index>(rng.Below(length - half));
    x(first, 1) = 1.0;
    x(second, 1) = 1.0;
    std::vector<double> target(length, kNoTarget);
    target.back() = x(first, 0) + x(second, 0);
    ds.inputs.push_back(std::move(x));
    ds.targets.push_back(std::move(target));
  }
  return ds;
}

SequenceDataset gen_frame_classification(Index n, Index dim, Index classes,
                                         std::uint64_t seed,
                                         const FrameTaskOptions& options) {
  if (classes < 2) {
    throw UsageError("gen_frame_classification: need at least 2 classes");
  }
  if (dim <= 0 || n < 0 || options.sequence_length <= 0) {
    throw UsageError("gen_frame_classification: sizes must be positive");
  }
  Rng rng(seed);
  Tensor means(classes, dim);
  for (Index i = 0; i < means.size(); ++i) {
    means.data()[i] = rng.Uniform() < 0.5 ? -1.0 : 1.0;
  }
  SequenceDataset ds;
  ds.kind = TaskKind::kFrameClassification;
  ds.input_dim = dim;
  ds.num_classes = classes;
  std::ostringstream prov;
  prov << "frames n=" << n << " dim=" << dim << " classes=" << classes
       << " seed=" << seed << " noise=" << FormatDouble(options.noise)
       << " persistence=" << FormatDouble(options.persistence)
       << " sequence_length=" << options.sequence_length;
  ds.provenance = prov.str();

  for (Index done = 0; done < n;) {
    const Index len = std::min(options.sequence_length, n - done);
    Tensor x(len, dim);
    std::vector<double> labels(len);
    Index label = static_cast<Index>(rng.Below(classes));
    for (Index t = 0; t < len; ++t) {
      if (t > 0 && rng.Uniform() >= options.persistence) {
        // Jump to one of the other classes uniformly.
        const Index next = static_cast<Index>(rng.Below(classes - 1));
        label = next >= label ? next + 1 : next;
      }
      labels[t] = static_cast<double>(label);
      for (Index j = 0; j < dim; ++j) {
        x(t, j) = means(label, j) + options.noise * rng.Normal();
      }
    }
    ds.inputs.push_back(std::move(x));
    ds.targets.push_back(std::move(labels));
    done += len;
  }
  return ds;
}

std::vector<ChunkRef> MakeChunks(const SequenceDataset& data, Index steps) {
  if (steps <= 0) throw UsageError("MakeChunks: steps must be positive");
  std::vector<ChunkRef> chunks;
  for (std::size_t s = 0; s < data.size(); ++s) {
    for (Index start = 0; start < data.inputs[s].rows(); start += steps) {
      chunks.push_back({s, start});
    }
  }
  return chunks;
}

SequenceBatch BuildBatch(const SequenceDataset& data,
                         std::span<const ChunkRef> chunks, Index steps) {
  const Index rows = static_cast<Index>(chunks.size());
  const Index target_cols = 1;
  SequenceBatch batch;
  batch.inputs.assign(steps, Tensor::Zero(rows, data.input_dim));
  batch.targets.assign(steps, Tensor::Zero(rows, target_cols));
  batch.weights = Tensor::Zero(steps, rows);
  for (Index r = 0; r < rows; ++r) {
    const ChunkRef& c = chunks[r];
    const Tensor& x = data.inputs.at(c.sequence);
    const auto& y = data.targets.at(c.sequence);
    for (Index t = 0; t < steps && c.start + t < x.rows(); ++t) {
      const Index f = c.start + t;
      batch.inputs[t].row(r) = x.row(f);
      if (!std::isnan(y[f])) {
        batch.targets[t](r, 0) = y[f];
        batch.weights(t, r) = 1.0;
      }
    }
  }
  return batch;
}

Metrics evaluate(const Model& model, const SequenceDataset& data) {
  if (model.input_dim() != data.input_dim) {
    throw UsageError("evaluate: model takes " +
                     std::to_string(model.input_dim()) +
                     " features but dataset has " +
                     std::to_string(data.input_dim));
  }
  const bool classify = model.loss() == LossKind::kCrossEntropy;
  if (classify != (data.kind == TaskKind::kFrameClassification)) {
    throw UsageError("evaluate: model head does not match task " +
                     std::string(TaskKindName(data.kind)));
  }
  if (classify && model.output_dim() != data.num_classes) {
    throw UsageError("evaluate: model predicts " +
                     std::to_string(model.output_dim()) + " classes, task has " +
                     std::to_string(data.num_classes));
  }
  if (!classify && model.output_dim() != 1) {
    throw UsageError("evaluate: regression head must have one output");
  }
  double loss_sum = 0.0;
  double weight = 0.0;
  double correct = 0.0;
  // Consecutive sequences of equal length share a batch.
  std::size_t s = 0;
  while (s < data.size()) {
    const Index len = data.inputs[s].rows();
    std::vector<ChunkRef> group;
    while (s < data.size() && data.inputs[s].rows() == len &&
           static_cast<Index>(group.size()) < kEvalBatch) {
      group.push_back({s, 0});
      ++s;
    }
    const BatchStats stats =
        RunBatch(model, BuildBatch(data, group, len), nullptr);
    loss_sum += stats.loss_sum;
    weight += stats.weight;
    correct += stats.correct;
  }
  Metrics m;
  m.frames = static_cast<Index>(weight);
  if (weight == 0) throw UsageError("evaluate: dataset has no target frames");
  m.loss = loss_sum / weight;
  if (classify) {
    m.accuracy = correct / weight;
  } else {
    m.mse = m.loss;
  }
  return m;
}

void WriteDatasetCsv(const SequenceDataset& data, std::ostream& out) {
  out << "sequence,step";
  for (Index j = 0; j < data.input_dim; ++j) out << ",x" << j;
  out << ",target\n";
  for (std::size_t s = 0; s < data.size(); ++s) {
    const Tensor& x = data.inputs[s];
    for (Index t = 0; t < x.rows(); ++t) {
      out << s << ',' << t;
      for (Index j = 0; j < x.cols(); ++j) out << ',' << FormatDouble(x(t, j));
      out << ',';
      if (!std::isnan(data.targets[s][t])) out << FormatDouble(data.targets[s][t]);
      out << '\n';
    }
  }
}

SequenceDataset ReadDatasetCsv(std::istream& in, TaskKind kind,
                               Index num_classes) {
  std::string line;
  if (!std::getline(in, line)) throw UsageError("dataset csv: empty input");
  Index columns = 1;
  for (char ch : line) columns += ch == ',';
  if (columns < 4) throw UsageError("dataset csv: header has too few columns");
  SequenceDataset ds;
  ds.kind = kind;
  ds.num_classes = kind == TaskKind::kAdding ? 0 : num_classes;
  ds.input_dim = columns - 3;
  ds.provenance = "csv";
  std::vector<std::vector<double>> rows;
  long current = -1;
  std::size_t line_no = 1;
  auto flush = [&]() {
    if (rows.empty()) return;
    Tensor x(static_cast<Index>(rows.size()), ds.input_dim);
    std::vector<double> y(rows.size());
    for (std::size_t t = 0; t < rows.size(); ++t) {
      for (Index j = 0; j < ds.input_dim; ++j) x(t, j) = rows[t][j];
      y[t] = rows[t][ds.input_dim];
    }
    ds.inputs.push_back(std::move(x));
    ds.targets.push_back(std::move(y));
    rows.clear();
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    if (static_cast<Index>(fields.size()) != columns) {
      throw UsageError("dataset csv line " + std::to_string(line_no) +
                       ": expected " + std::to_string(columns) + " fields");
    }
    const long seq = std::strtol(fields[0].c_str(), nullptr, 10);
    if (seq != current) {
      flush();
      current = seq;
    }
    std::vector<double> row(ds.input_dim + 1);
    for (Index j = 0; j < ds.input_dim; ++j) {
      row[j] = std::strtod(fields[2 + j].c_str(), nullptr);
    }
    row[ds.input_dim] =
        fields.back().empty() ? kNoTarget : std::strtod(fields.back().c_str(), nullptr);
    rows.push_back(std::move(row));
  }
  flush();
  return ds;
}

}  // namespace stu
