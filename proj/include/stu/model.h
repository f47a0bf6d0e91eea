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

#ifndef STU_MODEL_H_
#define STU_MODEL_H_

#include <span>
#include <string>
#include <variant>
#include <vector>

#include "stu/core.h"
#include "stu/highway.h"
#include "stu/layer_spec.h"
#include "stu/lstm.h"

namespace stu {

enum class LossKind { kCrossEntropy, kSquaredError };

// Affine output layer: logits for softmax cross-entropy, or the prediction
// itself for squared error.
struct HeadParams {
  LossKind loss = LossKind::kCrossEntropy;
  Tensor w;  // K x in
  Tensor b;  // 1 x K
};

using Layer = std::variant<LstmParams<double>, HighwayParams<double>, HeadParams>;

// A stack of layers applied frame by frame, recurrent layers carrying state
// across frames. The last layer may be an output head.
struct Model {
  std::vector<LayerSpec> specs;
  std::vector<Layer> layers;

  Index input_dim() const { return specs.front().in; }
  Index output_dim() const { return specs.back().output_dim(); }
  bool has_head() const { return !specs.empty() && IsHead(specs.back().type); }
  LossKind loss() const;
};

// Validates the dimension chain and initialises every layer from `rng`.
Model BuildModel(std::span<const LayerSpec> specs, Rng& rng);
// Same structure, every tensor zero. Used for gradient and velocity buffers.
Model ZerosLike(const Model& model);

// Visits every tensor of the model as
// f(name, tensor, role, trainable, recurrent). `name` is "layer<k>/<tensor>".
template <typename M, typename F>
void ForEachParam(M& model, F&& f) {
  for (std::size_t k = 0; k < model.layers.size(); ++k) {
    const std::string prefix = "layer" + std::to_string(k) + "/";
    const bool recurrent = IsRecurrent(model.specs[k].type);
    auto visit = [&](const std::string& name, auto& t, ParamRole role,
                     bool trainable) {
      f(prefix + name, t, role, trainable, recurrent);
    };
    auto& layer = model.layers[k];
    if (auto* l = std::get_if<LstmParams<double>>(&layer)) {
      ForEachLstmParam(*l, visit);
    } else if (auto* h = std::get_if<HighwayParams<double>>(&layer)) {
      ForEachHighwayParam(*h, visit);
    } else {
      auto& head = std::get<HeadParams>(layer);
      visit("W", head.w, ParamRole::kWeight, true);
      visit("b", head.b, ParamRole::kBias, true);
    }
  }
}

struct ParamRef {
  std::string name;
  Tensor* value;
  ParamRole role;
  bool trainable;
  bool recurrent;
};

std::vector<ParamRef> CollectParams(Model& model);

// Number of trainable scalars actually held by the model.
std::int64_t CountTrainable(const Model& model);

// Time-major minibatch of B sequences of T frames.
struct SequenceBatch {
  std::vector<Tensor> inputs;   // T entries of B x X
  std::vector<Tensor> targets;  // T entries; B x K values, or B x 1 class ids
  Tensor weights;               // T x B; nonzero where a frame has a target
  Index steps() const { return static_cast<Index>(inputs.size()); }
  Index batch() const { return inputs.empty() ? 0 : inputs.front().rows(); }
};

struct BatchStats {
  double loss_sum = 0.0;  // sum of weighted frame losses
  double weight = 0.0;    // sum of frame weights
  double correct = 0.0;   // weighted correct frames (cross-entropy heads)
  std::vector<double> step_loss;  // weighted loss per time step

  double mean_loss() const { return weight > 0 ? loss_sum / weight : 0.0; }
};

// Runs the batch from zero state. When `grads` is non-null it must mirror
// `model`; the exact gradient of mean_loss() is accumulated into it.
BatchStats RunBatch(const Model& model, const SequenceBatch& batch,
                    Model* grads);

}  // namespace stu

#endif  // STU_MODEL_H_
