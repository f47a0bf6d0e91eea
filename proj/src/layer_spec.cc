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

#include "stu/layer_spec.h"

#include <array>
#include <utility>

namespace stu {

namespace {

constexpr std::array<std::pair<LayerType, const char*>, 8> kTypeNames = {{
    {LayerType::kLstm, "lstm"},
    {LayerType::kLstmp, "lstmp"},
    {LayerType::kStuLstm, "stu_lstm"},
    {LayerType::kDense, "dense"},
    {LayerType::kHighway, "highway"},
    {LayerType::kStuHighway, "stu_highway"},
    {LayerType::kSoftmax, "softmax"},
    {LayerType::kLinear, "linear"},
}};

}  // namespace

const char* LayerTypeName(LayerType type) {
  for (const auto& [t, name] : kTypeNames) {
    if (t == type) return name;
  }
  return "?";
}

std::optional<LayerType> ParseLayerType(const std::string& name) {
  for (const auto& [t, n] : kTypeNames) {
    if (name == n) return t;
  }
  return std::nullopt;
}

bool IsRecurrent(LayerType type) {
  return type == LayerType::kLstm || type == LayerType::kLstmp ||
         type == LayerType::kStuLstm;
}

bool IsHead(LayerType type) {
  return type == LayerType::kSoftmax || type == LayerType::kLinear;
}

ParamCount& ParamCount::operator+=(const ParamCount& o) {
  weights += o.weights;
  biases += o.biases;
  peepholes += o.peepholes;
  eta += o.eta;
  gamma += o.gamma;
  projection += o.projection;
  return *this;
}

ParamCount count_params(const LayerSpec& s) {
  const std::int64_t x = s.in;
  const std::int64_t h = s.out;
  const std::int64_t p = s.proj;
  ParamCount c;
  switch (s.type) {
    case LayerType::kLstm:
      c.weights = 4 * (x * h + h * h);
      c.biases = 4 * h;
      c.peepholes = 3 * h;
      break;
    case LayerType::kLstmp:
      c.weights = 4 * (x * h + h * p);
      c.projection = h * p;
      c.biases = 4 * h;
      c.peepholes = 3 * h;
      break;
    case LayerType::kStuLstm:
      c.weights = x * h + h * h;
      c.biases = (s.untie_b ? 4 : 1) * h;
      c.peepholes = (s.untie_v ? 3 : 1) * h;
      c.eta = s.frozen_eta ? 0 : 4 * h;
      c.gamma = 4 * h;
      break;
    case LayerType::kDense:
    case LayerType::kSoftmax:
    case LayerType::kLinear:
      c.weights = x * h;
      c.biases = h;
      break;
    case LayerType::kHighway: {
      const std::int64_t units = s.carry == CarryMode::kIndependent ? 3 : 2;
      c.weights = units * x * h;
      c.biases = units * h;
      break;
    }
    case LayerType::kStuHighway: {
      const std::int64_t gates = s.carry == CarryMode::kIndependent ? 2 : 1;
      c.weights = x * h;
      c.biases = h;
      c.eta = (gates + 1) * h;
      c.gamma = (gates + (s.activation == CandidateKind::kSigmoid ? 1 : 0)) * h;
      break;
    }
  }
  return c;
}

StackCount count_params(std::span<const LayerSpec> stack) {
  StackCount out;
  for (const LayerSpec& s : stack) {
    const ParamCount c = count_params(s);
    out.layers.push_back(c);
    out.total += c;
    if (!IsHead(s.type)) out.hidden += c;
  }
  return out;
}

}  // namespace stu
