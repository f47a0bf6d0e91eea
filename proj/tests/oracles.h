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

// Independent reference implementations shared by the unit tests and the
// acceptance binary. Nothing here calls the vectorised layer code except
// where a test compares against it.

#ifndef STU_TESTS_ORACLES_H_
#define STU_TESTS_ORACLES_H_

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "stu/highway.h"
#include "stu/lstm.h"
#include "stu/model.h"

namespace stu::testing {

// Fills every tensor with random values. Gate scales stay near the
// identity start so that no unit saturates.
inline void Randomize(LstmParams<double>& p, Rng& rng, double scale = 0.5) {
  ForEachLstmParam(p, [&](const std::string&, Tensor& t, ParamRole role, bool) {
    if (role == ParamRole::kEta || role == ParamRole::kGamma) {
      t = RandomUniform<double>(t.rows(), t.cols(), 0.5, 1.5, rng);
    } else {
      t = RandomUniform<double>(t.rows(), t.cols(), -scale, scale, rng);
    }
  });
}

inline void Randomize(HighwayParams<double>& p, Rng& rng, double scale = 0.5) {
  ForEachHighwayParam(p, [&](const std::string&, Tensor& t, ParamRole role,
                             bool) {
    if (role == ParamRole::kEta || role == ParamRole::kGamma) {
      t = RandomUniform<double>(t.rows(), t.cols(), 0.5, 1.5, rng);
    } else {
      t = RandomUniform<double>(t.rows(), t.cols(), -scale, scale, rng);
    }
  });
}

inline double Logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct ScalarLstmOut {
  Tensor h;
  Tensor c;
};

// One LSTM step, one scalar at a time, straight from the gate equations.
inline ScalarLstmOut ScalarLstmStep(const LstmParams<double>& p, const Tensor& x,
                                    const Tensor& h_prev, const Tensor& c_prev) {
  const Index batch = x.rows();
  const Index hidden = p.hidden_size();
  const Index in = p.input_size();
  const Index rec = p.output_size();
  const bool tied = p.semi_tied();
  auto wi = [&](int g) { return tied ? 0 : g; };
  auto bi = [&](int g) { return p.bias_index(g); };
  auto vi = [&](int g) { return p.peephole_index(g); };

  ScalarLstmOut out{Tensor(batch, rec), Tensor(batch, hidden)};
  Tensor m(batch, hidden);
  for (Index r = 0; r < batch; ++r) {
    for (Index j = 0; j < hidden; ++j) {
      double pre[4];
      for (int g = 0; g < 4; ++g) {
        double s = 0.0;
        for (Index k = 0; k < in; ++k) s += p.w[wi(g)](j, k) * x(r, k);
        for (Index k = 0; k < rec; ++k) s += p.u[wi(g)](j, k) * h_prev(r, k);
        // A tied bias enters e_t once; untied biases are per unit.
        s += p.b[bi(g)](0, j);
        pre[g] = s;
      }
      auto unit = [&](int g, double a) {
        if (!tied) return g == kCandidate ? std::tanh(a) : Logistic(a);
        const double eta = p.acts[g].eta(0, j);
        const double gamma = p.acts[g].gamma(0, j);
        return g == kCandidate ? eta * std::tanh(gamma * a)
                               : eta * Logistic(gamma * a);
      };
      const double i = unit(kInputGate, pre[kInputGate] +
                                            p.v[vi(kInputGate)](0, j) * c_prev(r, j));
      const double f = unit(kForgetGate, pre[kForgetGate] +
                                             p.v[vi(kForgetGate)](0, j) * c_prev(r, j));
      const double cand = unit(kCandidate, pre[kCandidate]);
      const double c = f * c_prev(r, j) + i * cand;
      const double o =
          unit(kOutputGate, pre[kOutputGate] + p.v[vi(kOutputGate)](0, j) * c);
      out.c(r, j) = c;
      m(r, j) = o * std::tanh(c);
    }
    for (Index q = 0; q < rec; ++q) {
      if (!p.projected()) {
        out.h(r, q) = m(r, q);
        continue;
      }
      double s = 0.0;
      for (Index j = 0; j < hidden; ++j) s += p.proj(q, j) * m(r, j);
      out.h(r, q) = s;
    }
  }
  return out;
}

// Standard LSTM whose four weight sets, biases and peepholes all copy the
// shared ones of a semi-tied layer. With eta = gamma = 1 the two compute
// the same function.
inline LstmParams<double> UntiedClone(const LstmParams<double>& stu) {
  LstmParams<double> p = LstmParams<double>::Zeros(
      LstmVariant::kStandard, stu.input_size(), stu.hidden_size());
  for (int g = 0; g < kLstmUnits; ++g) {
    p.w[g] = stu.w[0];
    p.u[g] = stu.u[0];
    p.b[g] = stu.b[stu.bias_index(g)];
  }
  for (int g = 0; g < 3; ++g) p.v[g] = stu.v[stu.peephole_index(g)];
  return p;
}

inline HighwayParams<double> UntiedClone(const HighwayParams<double>& stu) {
  HighwayParams<double> p =
      HighwayParams<double>::Zeros(HighwayVariant::kHighway, stu.input_size(),
                                   stu.output_size(), stu.candidate, stu.carry);
  for (auto& w : p.w) w = stu.w[0];
  for (auto& b : p.b) b = stu.b[0];
  return p;
}

// Scalar loss sum_t <r_t, h_t> over a sequence, run with the vectorised
// layer; gradients are accumulated into `grads` when given.
inline double LstmSequenceLoss(const LstmParams<double>& p,
                               const std::vector<Tensor>& xs,
                               const std::vector<Tensor>& rs,
                               LstmParams<double>* grads = nullptr,
                               std::vector<Tensor>* d_xs = nullptr) {
  CellState<double> s = CellState<double>::Zero(xs.front().rows(), p);
  std::vector<LstmCache<double>> caches;
  double loss = 0.0;
  for (std::size_t t = 0; t < xs.size(); ++t) {
    LstmStep<double> step = lstm_forward(p, xs[t], s);
    loss += step.h.cwiseProduct(rs[t]).sum();
    s = step.state;
    caches.push_back(std::move(step.cache));
  }
  if (grads != nullptr) {
    Tensor d_h_next = Tensor::Zero(xs.front().rows(), p.output_size());
    Tensor d_c_next;
    if (d_xs != nullptr) d_xs->assign(xs.size(), Tensor());
    for (std::size_t t = xs.size(); t-- > 0;) {
      const Tensor d_h = rs[t] + d_h_next;
      LstmInputGrads<double> g = lstm_backward(p, caches[t], d_h, d_c_next, *grads);
      d_h_next = g.d_h_prev;
      d_c_next = g.d_c_prev;
      if (d_xs != nullptr) (*d_xs)[t] = g.d_x;
    }
  }
  return loss;
}

inline double HighwayLoss(const HighwayParams<double>& p, const Tensor& x,
                          const Tensor& r, HighwayParams<double>* grads = nullptr,
                          Tensor* d_x = nullptr) {
  HighwayStep<double> step = highway_forward(p, x);
  if (grads != nullptr) {
    Tensor dx = highway_backward(p, step.cache, r, *grads);
    if (d_x != nullptr) *d_x = dx;
  }
  return step.y.cwiseProduct(r).sum();
}

inline double RelErr(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Central differences over every trainable coordinate of `p`, compared to
// the analytic gradients in `grads` (which must mirror `p`). Returns the
// worst relative error.
template <typename Params, typename ForEach, typename Loss>
double LayerFiniteDiff(Params p, const Params& grads, ForEach for_each,
                       Loss loss, double eps, double floor) {
  std::vector<Tensor*> values;
  std::vector<bool> trainable;
  for_each(p, [&](const std::string&, Tensor& t, ParamRole, bool train) {
    values.push_back(&t);
    trainable.push_back(train);
  });
  std::vector<const Tensor*> analytic;
  for_each(grads, [&](const std::string&, const Tensor& t, ParamRole, bool) {
    analytic.push_back(&t);
  });
  double worst = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (!trainable[k]) continue;
    for (Index i = 0; i < values[k]->size(); ++i) {
      double& v = values[k]->data()[i];
      const double saved = v;
      v = saved + eps;
      const double plus = loss(p);
      v = saved - eps;
      const double minus = loss(p);
      v = saved;
      worst = std::max(worst, RelErr(analytic[k]->data()[i],
                                     (plus - minus) / (2 * eps), floor));
    }
  }
  return worst;
}

// Randomises every tensor of a model (weights, biases, peepholes, eta,
// gamma, head).
inline void Randomize(Model& model, Rng& rng) {
  for (auto& layer : model.layers) {
    if (auto* l = std::get_if<LstmParams<double>>(&layer)) Randomize(*l, rng);
    if (auto* h = std::get_if<HighwayParams<double>>(&layer)) Randomize(*h, rng);
    if (auto* head = std::get_if<HeadParams>(&layer)) {
      head->w = RandomUniform<double>(head->w.rows(), head->w.cols(), -0.5, 0.5, rng);
      head->b = RandomUniform<double>(1, head->b.cols(), -0.5, 0.5, rng);
    }
  }
}

// T steps of B random frames; regression targets or class ids.
inline SequenceBatch RandomBatch(const Model& model, Index steps, Index batch,
                                 Rng& rng) {
  SequenceBatch b;
  const bool classify = model.loss() == LossKind::kCrossEntropy;
  b.weights = Tensor::Ones(steps, batch);
  for (Index t = 0; t < steps; ++t) {
    b.inputs.push_back(RandomUniform<double>(batch, model.input_dim(), -1.0, 1.0, rng));
    Tensor y(batch, classify ? 1 : model.output_dim());
    for (Index r = 0; r < batch; ++r) {
      for (Index j = 0; j < y.cols(); ++j) {
        y(r, j) = classify ? static_cast<double>(rng.Below(model.output_dim()))
                           : rng.Uniform(-1.0, 1.0);
      }
    }
    b.targets.push_back(y);
  }
  return b;
}

// Time-unrolled oracle for a [stu_lstm, linear] model under squared error.
// Every step gets its own standard-LSTM copy of the shared weights (so
// neither the tying nor the time loop of the library is reused), and the
// returned tensors are the raw sums over steps and gates of the per-copy
// gradients: W, U, b (shared) and V (shared). Requires eta = gamma = 1 and
// tied b and V.
struct UnrolledGrads {
  double loss = 0.0;
  Tensor w, u, b, v;
};

inline UnrolledGrads UnrolledCloneGrads(const Model& model,
                                        const SequenceBatch& batch) {
  const auto& stu = std::get<LstmParams<double>>(model.layers.at(0));
  const auto& head = std::get<HeadParams>(model.layers.at(1));
  const Index steps = batch.steps();
  const Index rows = batch.batch();
  const double total = batch.weights.sum();
  std::vector<LstmParams<double>> copies(steps, UntiedClone(stu));
  std::vector<LstmCache<double>> caches;
  std::vector<Tensor> d_hs;
  CellState<double> s = CellState<double>::Zero(rows, stu);
  UnrolledGrads out;
  for (Index t = 0; t < steps; ++t) {
    LstmStep<double> step = lstm_forward(copies[t], batch.inputs[t], s);
    Tensor y = step.h * head.w.transpose();
    y.rowwise() += head.b.row(0);
    Tensor d_y = Tensor::Zero(rows, y.cols());
    for (Index r = 0; r < rows; ++r) {
      const double wt = batch.weights(t, r);
      for (Index j = 0; j < y.cols(); ++j) {
        const double err = y(r, j) - batch.targets[t](r, j);
        out.loss += wt * err * err / total;
        d_y(r, j) = 2.0 * wt * err / total;
      }
    }
    d_hs.push_back(d_y * head.w);
    s = step.state;
    caches.push_back(std::move(step.cache));
  }
  const Index h = stu.hidden_size();
  out.w = Tensor::Zero(h, stu.input_size());
  out.u = Tensor::Zero(h, h);
  out.b = Tensor::Zero(1, h);
  out.v = Tensor::Zero(1, h);
  Tensor d_h_next = Tensor::Zero(rows, h);
  Tensor d_c_next;
  for (Index t = steps; t-- > 0;) {
    LstmParams<double> g = ZerosLike(copies[t]);
    const LstmInputGrads<double> in =
        lstm_backward(copies[t], caches[t], Tensor(d_hs[t] + d_h_next), d_c_next, g);
    d_h_next = in.d_h_prev;
    d_c_next = in.d_c_prev;
    for (int k = 0; k < kLstmUnits; ++k) {
      out.w += g.w[k];
      out.u += g.u[k];
      out.b += g.b[k];
    }
    for (int k = 0; k < 3; ++k) out.v += g.v[k];
  }
  return out;
}

}  // namespace stu::testing

#endif  // STU_TESTS_ORACLES_H_
