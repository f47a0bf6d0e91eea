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

#ifndef STU_LAYER_SPEC_H_
#define STU_LAYER_SPEC_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stu/core.h"
#include "stu/highway.h"

namespace stu {

enum class LayerType {
  kLstm,
  kLstmp,
  kStuLstm,
  kDense,
  kHighway,
  kStuHighway,
  kSoftmax,  // output head, cross-entropy
  kLinear,   // output head, squared error
};

const char* LayerTypeName(LayerType type);
std::optional<LayerType> ParseLayerType(const std::string& name);

bool IsRecurrent(LayerType type);
bool IsHead(LayerType type);

struct LayerSpec {
  LayerType type = LayerType::kLstm;
  Index in = 0;
  Index out = 0;   // hidden width H; for heads the number of outputs
  Index proj = 0;  // LSTMP projection width P
  CandidateKind activation = CandidateKind::kSigmoid;
  CarryMode carry = CarryMode::kIndependent;
  bool untie_v = false;
  bool untie_b = false;
  bool frozen_eta = false;

  // Width this layer hands to the next one.
  Index output_dim() const { return type == LayerType::kLstmp ? proj : out; }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

// Trainable scalars, itemised by role.
struct ParamCount {
  std::int64_t weights = 0;
  std::int64_t biases = 0;
  std::int64_t peepholes = 0;
  std::int64_t eta = 0;
  std::int64_t gamma = 0;
  std::int64_t projection = 0;

  std::int64_t total() const {
    return weights + biases + peepholes + eta + gamma + projection;
  }
  ParamCount& operator+=(const ParamCount& o);
  friend bool operator==(const ParamCount&, const ParamCount&) = default;
};

struct StackCount {
  std::vector<ParamCount> layers;
  ParamCount hidden;  // everything except output heads
  ParamCount total;
};

// Closed-form counts, e.g. 4(XH + H^2) + 4H + 3H for a peephole LSTM and
// XH + H^2 + H + H + 8H for a semi-tied one.
ParamCount count_params(const LayerSpec& spec);
StackCount count_params(std::span<const LayerSpec> stack);

}  // namespace stu

#endif  // STU_LAYER_SPEC_H_
