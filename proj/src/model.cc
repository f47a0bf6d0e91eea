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

#include "stu/model.h"

#include <cmath>

namespace stu {

namespace {

std::string Describe(std::size_t k, const LayerSpec& s) {
  return "layer " + std::to_string(k) + " (" + LayerTypeName(s.type) + " " +
         std::to_string(s.in) + "->" + std::to_string(s.output_dim()) + ")";
}

struct HeadCache {
  Tensor x;
  Tensor out;  // softmax probabilities or linear predictions
};

using LayerCache =
    std::variant<LstmCache<double>, HighwayCache<double>, HeadCache>;

// Loss of one frame row; writes grad_weight * dloss/dout into d_out.
double FrameLoss(LossKind loss, const Tensor& logits, const Tensor& out,
                 const Tensor& target, Index row, double grad_weight,
                 Tensor* d_out, bool* correct) {
  const Index k = out.cols();
  if (loss == LossKind::kCrossEntropy) {
    const Index label = static_cast<Index>(target(row, 0));
    if (label < 0 || label >= k) {
      throw UsageError("class label " + std::to_string(label) +
                       " outside [0, " + std::to_string(k) + ")");
    }
    Index best = 0;
    out.row(row).maxCoeff(&best);
    *correct = best == label;
    if (d_out != nullptr) {
      d_out->row(row) = grad_weight * out.row(row);
      (*d_out)(row, label) -= grad_weight;
    }
    const double top = logits.row(row).maxCoeff();
    const double lse =
        top + std::log((logits.row(row).array() - top).exp().sum());
    return lse - logits(row, label);
  }
  const auto diff = (out.row(row) - target.row(row)).eval();
  *correct = false;
  if (d_out != nullptr) d_out->row(row) = 2.0 * grad_weight * diff;
  return diff.squaredNorm();
}

Tensor Softmax(const Tensor& logits) {
  Tensor p = logits.colwise() - logits.rowwise().maxCoeff();
  p = p.array().exp().matrix();
  p.array().colwise() /= p.rowwise().sum().array();
  return p;
}

}  // namespace

LossKind Model::loss() const {
  if (!has_head()) throw UsageError("model has no output head");
  return std::get<HeadParams>(layers.back()).loss;
}

Model BuildModel(std::span<const LayerSpec> specs, Rng& rng) {
  if (specs.empty()) throw UsageError("model needs at least one layer");
  Model model;
  for (std::size_t k = 0; k < specs.size(); ++k) {
    const LayerSpec& s = specs[k];
    if (s.in <= 0 || s.out <= 0) {
      throw DimensionError(Describe(k, s) + ": sizes must be positive");
    }
    if (k > 0 && specs[k - 1].output_dim() != s.in) {
      throw DimensionError("dimension chain broken: " +
                           Describe(k - 1, specs[k - 1]) + " feeds " +
                           Describe(k, s));
    }
    if (IsHead(s.type) && k + 1 != specs.size()) {
      throw UsageError(Describe(k, s) + ": output head must be the last layer");
    }
    LstmOptions opts{s.untie_v, s.untie_b, s.frozen_eta};
    switch (s.type) {
      case LayerType::kLstm:
        model.layers.emplace_back(LstmParams<double>::Init(
            LstmVariant::kStandard, s.in, s.out, 0, {}, rng));
        break;
      case LayerType::kLstmp:
        if (s.proj <= 0) {
          throw DimensionError(Describe(k, s) + ": projection size required");
        }
        model.layers.emplace_back(LstmParams<double>::Init(
            LstmVariant::kProjected, s.in, s.out, s.proj, {}, rng));
        break;
      case LayerType::kStuLstm:
        model.layers.emplace_back(LstmParams<double>::Init(
            LstmVariant::kSemiTied, s.in, s.out, 0, opts, rng));
        break;
      case LayerType::kDense:
        model.layers.emplace_back(HighwayParams<double>::Init(
            HighwayVariant::kPlainDense, s.in, s.out, s.activation, s.carry,
            rng));
        break;
      case LayerType::kHighway:
      case LayerType::kStuHighway:
        if (s.in != s.out) {
          throw DimensionError(Describe(k, s) +
                               ": highway layers must be square");
        }
        model.layers.emplace_back(HighwayParams<double>::Init(
            s.type == LayerType::kHighway ? HighwayVariant::kHighway
                                          : HighwayVariant::kSemiTiedHighway,
            s.in, s.out, s.activation, s.carry, rng));
        break;
      case LayerType::kSoftmax:
      case LayerType::kLinear: {
        HeadParams head;
        head.loss = s.type == LayerType::kSoftmax ? LossKind::kCrossEntropy
                                                  : LossKind::kSquaredError;
        const double r = 1.0 / std::sqrt(static_cast<double>(s.in));
        head.w = RandomUniform<double>(s.out, s.in, -r, r, rng);
        head.b = Tensor::Zero(1, s.out);
        model.layers.emplace_back(std::move(head));
        break;
      }
    }
    model.specs.push_back(s);
  }
  return model;
}

Model ZerosLike(const Model& model) {
  Model z = model;
  ForEachParam(z, [](const std::string&, Tensor& t, ParamRole, bool, bool) {
    t.setZero();
  });
  return z;
}

std::vector<ParamRef> CollectParams(Model& model) {
  std::vector<ParamRef> refs;
  ForEachParam(model, [&](const std::string& name, Tensor& t, ParamRole role,
                          bool trainable, bool recurrent) {
    refs.push_back({name, &t, role, trainable, recurrent});
  });
  return refs;
}

std::int64_t CountTrainable(const Model& model) {
  std::int64_t n = 0;
  ForEachParam(model, [&](const std::string&, const Tensor& t, ParamRole,
                          bool trainable, bool) {
    if (trainable) n += t.size();
  });
  return n;
}

BatchStats RunBatch(const Model& model, const SequenceBatch& batch,
                    Model* grads) {
  if (!model.has_head()) throw UsageError("model has no output head");
  const Index steps = batch.steps();
  const Index rows = batch.batch();
  const std::size_t depth = model.layers.size();
  if (steps == 0) throw UsageError("empty batch");
  if (static_cast<Index>(batch.targets.size()) != steps ||
      batch.weights.rows() != steps || batch.weights.cols() != rows) {
    throw DimensionError("batch targets/weights do not match " +
                         std::to_string(steps) + " steps of " +
                         std::to_string(rows) + " sequences");
  }
  for (Index t = 0; t < steps; ++t) {
    if (batch.inputs[t].cols() != model.input_dim() ||
        batch.inputs[t].rows() != rows) {
      throw DimensionError("frame " + std::to_string(t) + " has shape " +
                           ShapeString(batch.inputs[t]) + ", model expects " +
                           std::to_string(model.input_dim()) + " features");
    }
  }

  const LossKind loss = model.loss();
  BatchStats stats;
  stats.step_loss.assign(steps, 0.0);
  stats.weight = batch.weights.sum();
  const double scale = stats.weight > 0 ? 1.0 / stats.weight : 0.0;

  std::vector<CellState<double>> state(depth);
  for (std::size_t k = 0; k < depth; ++k) {
    if (auto* l = std::get_if<LstmParams<double>>(&model.layers[k])) {
      state[k] = CellState<double>::Zero(rows, *l);
    }
  }
  std::vector<std::vector<LayerCache>> caches;
  std::vector<Tensor> d_out(steps);
  if (grads != nullptr) caches.resize(steps);

  for (Index t = 0; t < steps; ++t) {
    Tensor x = batch.inputs[t];
    for (std::size_t k = 0; k < depth; ++k) {
      const Layer& layer = model.layers[k];
      if (auto* l = std::get_if<LstmParams<double>>(&layer)) {
        LstmStep<double> step = lstm_forward(*l, x, state[k]);
        x = std::move(step.h);
        state[k] = std::move(step.state);
        if (grads != nullptr) caches[t].emplace_back(std::move(step.cache));
      } else if (auto* h = std::get_if<HighwayParams<double>>(&layer)) {
        HighwayStep<double> step = highway_forward(*h, x);
        x = std::move(step.y);
        if (grads != nullptr) caches[t].emplace_back(std::move(step.cache));
      } else {
        const auto& head = std::get<HeadParams>(layer);
        Tensor z = x * head.w.transpose();
        z.array().rowwise() += head.b.row(0).array();
        HeadCache hc{std::move(x),
                     loss == LossKind::kCrossEntropy ? Softmax(z) : z};
        if (batch.targets[t].rows() != rows) {
          throw DimensionError("targets at step " + std::to_string(t) +
                               " have " + std::to_string(batch.targets[t].rows()) +
                               " rows, expected " + std::to_string(rows));
        }
        if (grads != nullptr) d_out[t] = Tensor::Zero(rows, hc.out.cols());
        for (Index r = 0; r < rows; ++r) {
          const double w = batch.weights(t, r);
          if (w == 0.0) continue;
          if (loss == LossKind::kSquaredError &&
              batch.targets[t].cols() != hc.out.cols()) {
            throw DimensionError("regression targets have " +
                                 std::to_string(batch.targets[t].cols()) +
                                 " columns, head has " +
                                 std::to_string(hc.out.cols()));
          }
          bool correct = false;
          const double l = FrameLoss(loss, z, hc.out, batch.targets[t], r,
                                     w * scale,
                                     grads != nullptr ? &d_out[t] : nullptr,
                                     &correct);
          stats.step_loss[t] += w * l;
          if (correct) stats.correct += w;
        }
        stats.loss_sum += stats.step_loss[t];
        if (grads != nullptr) caches[t].emplace_back(std::move(hc));
      }
    }
  }

  if (grads == nullptr) return stats;

  // Reverse through time; recurrent layers carry dL/dh and dL/dc backwards.
  std::vector<Tensor> d_h_next(depth);
  std::vector<Tensor> d_c_next(depth);
  for (Index t = steps - 1; t >= 0; --t) {
    Tensor d = d_out[t];
    for (std::size_t k = depth; k-- > 0;) {
      const Layer& layer = model.layers[k];
      Layer& g = grads->layers[k];
      if (auto* l = std::get_if<LstmParams<double>>(&layer)) {
        if (d_h_next[k].size() != 0) d += d_h_next[k];
        LstmInputGrads<double> in = lstm_backward(
            *l, std::get<LstmCache<double>>(caches[t][k]), d, d_c_next[k],
            std::get<LstmParams<double>>(g));
        d = std::move(in.d_x);
        d_h_next[k] = std::move(in.d_h_prev);
        d_c_next[k] = std::move(in.d_c_prev);
      } else if (auto* h = std::get_if<HighwayParams<double>>(&layer)) {
        d = highway_backward(*h, std::get<HighwayCache<double>>(caches[t][k]),
                             d, std::get<HighwayParams<double>>(g));
      } else {
        const auto& head = std::get<HeadParams>(layer);
        auto& gh = std::get<HeadParams>(g);
        const auto& hc = std::get<HeadCache>(caches[t][k]);
        gh.w.noalias() += d.transpose() * hc.x;
        gh.b += d.colwise().sum();
        d = d * head.w;
      }
    }
  }
  return stats;
}

}  // namespace stu
