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

// LSTM family: the peephole LSTM, its projected form (LSTMP) and the
// semi-tied form in which every gate and the candidate read one shared
// pre-activation
//
//   e_t = W x_t + U h_{t-1} + b
//   i_t = sigmoid_{eta_i,gamma_i}(e_t + V o c_{t-1})
//   f_t = sigmoid_{eta_f,gamma_f}(e_t + V o c_{t-1})
//   o_t = sigmoid_{eta_o,gamma_o}(e_t + V o c_t)
//   c~_t = tanh_{eta_c,gamma_c}(e_t)
//
// followed by the usual c_t = f_t o c_{t-1} + i_t o c~_t and
// h_t = o_t o tanh(c_t).

#ifndef STU_LSTM_H_
#define STU_LSTM_H_

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "stu/activations.h"
#include "stu/core.h"

namespace stu {

enum class LstmVariant { kStandard, kProjected, kSemiTied };

// Unit order used for every per-gate array.
enum LstmUnit { kInputGate = 0, kForgetGate = 1, kOutputGate = 2,
                kCandidate = 3 };
inline constexpr int kLstmUnits = 4;
inline constexpr std::array<const char*, kLstmUnits> kLstmUnitSuffix = {
    "i", "f", "o", "c"};

struct LstmOptions {
  bool untie_v = false;
  bool untie_b = false;
  bool frozen_eta = false;
};

template <typename Scalar>
struct LstmParams {
  LstmVariant variant = LstmVariant::kStandard;
  LstmOptions options;
  std::vector<Matrix<Scalar>> w;  // H x X; four per-unit, or one shared
  std::vector<Matrix<Scalar>> u;  // H x H (H x P when projected)
  Matrix<Scalar> proj;            // P x H, projected variant only
  std::vector<Matrix<Scalar>> b;  // 1 x H; four, or one shared
  std::vector<Matrix<Scalar>> v;  // 1 x H peepholes for i, f, o; or one
  std::array<ActParams<Scalar>, kLstmUnits> acts;  // semi-tied only

  bool semi_tied() const { return variant == LstmVariant::kSemiTied; }
  bool projected() const { return variant == LstmVariant::kProjected; }
  Index input_size() const { return w.front().cols(); }
  Index hidden_size() const { return w.front().rows(); }
  // Width of h_t, which is also the recurrent input.
  Index output_size() const { return projected() ? proj.rows() : hidden_size(); }

  int bias_index(int unit) const {
    return semi_tied() && !options.untie_b ? 0 : unit;
  }
  int peephole_index(int unit) const {
    return semi_tied() && !options.untie_v ? 0 : unit;
  }

  // Zero weights, biases and peepholes; identity activations.
  static LstmParams Zeros(LstmVariant variant, Index input, Index hidden,
                          Index projection = 0, LstmOptions options = {});
  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases and
  // peepholes, identity activations.
  static LstmParams Init(LstmVariant variant, Index input, Index hidden,
                         Index projection, LstmOptions options, Rng& rng);
};

template <typename Scalar>
struct CellState {
  Matrix<Scalar> c;  // B x H
  Matrix<Scalar> h;  // B x output_size

  static CellState Zero(Index batch, const LstmParams<Scalar>& p) {
    return {Matrix<Scalar>::Zero(batch, p.hidden_size()),
            Matrix<Scalar>::Zero(batch, p.output_size())};
  }
};

template <typename Scalar>
struct LstmCache {
  Matrix<Scalar> x;
  Matrix<Scalar> h_prev;
  Matrix<Scalar> c_prev;
  std::array<Matrix<Scalar>, kLstmUnits> pre;    // activation inputs
  std::array<Matrix<Scalar>, kLstmUnits> inner;  // f(gamma * pre)
  std::array<Matrix<Scalar>, kLstmUnits> value;  // gate and candidate values
  Matrix<Scalar> c;
  Matrix<Scalar> tanh_c;
  Matrix<Scalar> m;  // o_t * tanh(c_t), before projection
};

template <typename Scalar>
struct LstmStep {
  Matrix<Scalar> h;
  CellState<Scalar> state;
  LstmCache<Scalar> cache;
};

template <typename Scalar>
struct LstmInputGrads {
  Matrix<Scalar> d_x;
  Matrix<Scalar> d_h_prev;
  Matrix<Scalar> d_c_prev;
};

// Visits every tensor as f(name, matrix, role, trainable). Works on const
// and mutable params alike.
template <typename Params, typename F>
void ForEachLstmParam(Params& p, F&& f) {
  const bool tied = p.semi_tied();
  for (std::size_t k = 0; k < p.w.size(); ++k) {
    f(tied ? std::string("W") : std::string("W_") + kLstmUnitSuffix[k], p.w[k],
      ParamRole::kWeight, true);
  }
  for (std::size_t k = 0; k < p.u.size(); ++k) {
    f(tied ? std::string("U") : std::string("U_") + kLstmUnitSuffix[k], p.u[k],
      ParamRole::kWeight, true);
  }
  if (p.projected()) f(std::string("P"), p.proj, ParamRole::kProjection, true);
  for (std::size_t k = 0; k < p.b.size(); ++k) {
    f(p.b.size() == 1 ? std::string("b") : std::string("b_") + kLstmUnitSuffix[k],
      p.b[k], ParamRole::kBias, true);
  }
  for (std::size_t k = 0; k < p.v.size(); ++k) {
    f(p.v.size() == 1 ? std::string("V") : std::string("V_") + kLstmUnitSuffix[k],
      p.v[k], ParamRole::kPeephole, true);
  }
  if (!tied) return;
  for (int k = 0; k < kLstmUnits; ++k) {
    auto& act = p.acts[k];
    f(std::string("eta_") + kLstmUnitSuffix[k], act.eta, ParamRole::kEta,
      !act.frozen_eta);
    f(std::string("gamma_") + kLstmUnitSuffix[k], act.gamma, ParamRole::kGamma,
      true);
  }
}

template <typename Scalar>
LstmParams<Scalar> ZerosLike(const LstmParams<Scalar>& p) {
  LstmParams<Scalar> z = p;
  ForEachLstmParam(z, [](const std::string&, Matrix<Scalar>& m, ParamRole,
                         bool) { m.setZero(); });
  return z;
}

// Any variant.
template <typename Scalar>
LstmStep<Scalar> lstm_forward(const LstmParams<Scalar>& p,
                              const Matrix<Scalar>& x,
                              const CellState<Scalar>& s);

// Variant-checked entry points.
template <typename Scalar>
LstmStep<Scalar> lstm_step(const LstmParams<Scalar>& p,
                           const Matrix<Scalar>& x, const CellState<Scalar>& s);
template <typename Scalar>
LstmStep<Scalar> lstmp_step(const LstmParams<Scalar>& p,
                            const Matrix<Scalar>& x,
                            const CellState<Scalar>& s);
template <typename Scalar>
LstmStep<Scalar> stu_lstm_step(const LstmParams<Scalar>& p,
                               const Matrix<Scalar>& x,
                               const CellState<Scalar>& s);

// Reverse-mode step. d_h is dL/dh_t, d_c is dL/dc_t arriving from step t+1
// (an empty matrix means zero). Parameter gradients are accumulated into
// `grads`, which must have the shape of `p`.
template <typename Scalar>
LstmInputGrads<Scalar> lstm_backward(const LstmParams<Scalar>& p,
                                     const LstmCache<Scalar>& cache,
                                     const Matrix<Scalar>& d_h,
                                     const Matrix<Scalar>& d_c,
                                     LstmParams<Scalar>& grads);

struct GateProfileRow {
  Index unit;
  double input_gate;
  double forget_gate;
  double candidate;
};

// Resting response of each semi-tied unit, eta * sigmoid(gamma) for the
// input and forget gates and eta_c * tanh(gamma_c) for the candidate, sorted
// by descending input-gate value.
template <typename Scalar>
std::vector<GateProfileRow> gate_profile(const LstmParams<Scalar>& p);

// ---------------------------------------------------------------------------
// Implementation.

namespace internal {

template <typename Scalar>
void CheckLstmInputs(const LstmParams<Scalar>& p, const Matrix<Scalar>& x,
                     const CellState<Scalar>& s) {
  if (x.cols() != p.input_size()) {
    throw DimensionError("lstm: input " + ShapeString(x) + " but layer expects " +
                         std::to_string(p.input_size()) + " columns");
  }
  if (s.c.rows() != x.rows() || s.c.cols() != p.hidden_size()) {
    throw DimensionError("lstm: cell state " + ShapeString(s.c) +
                         " inconsistent with input " + ShapeString(x) +
                         " and hidden size " + std::to_string(p.hidden_size()));
  }
  if (s.h.rows() != x.rows() || s.h.cols() != p.output_size()) {
    throw DimensionError("lstm: hidden state " + ShapeString(s.h) +
                         " inconsistent with input " + ShapeString(x) +
                         " and state size " + std::to_string(p.output_size()));
  }
}

template <typename Scalar>
void AddRow(Matrix<Scalar>& m, const Matrix<Scalar>& row) {
  m.array().rowwise() += row.row(0).array();
}

template <typename Scalar>
Matrix<Scalar> ScaleRows(const Matrix<Scalar>& m, const Matrix<Scalar>& row) {
  return (m.array().rowwise() * row.row(0).array()).matrix();
}

template <typename Scalar>
Matrix<Scalar> ColumnSum(const Matrix<Scalar>& m) {
  return m.colwise().sum();
}

inline ActKind UnitKind(int unit) {
  return unit == kCandidate ? ActKind::kPTanh : ActKind::kPSigmoid;
}

template <typename Scalar>
void CheckGradShapes(const LstmParams<Scalar>& p,
                     const LstmParams<Scalar>& grads) {
  std::vector<std::pair<Index, Index>> shapes;
  ForEachLstmParam(p, [&](const std::string&, const Matrix<Scalar>& m,
                          ParamRole, bool) {
    shapes.emplace_back(m.rows(), m.cols());
  });
  std::size_t k = 0;
  bool ok = grads.variant == p.variant;
  ForEachLstmParam(grads, [&](const std::string&, const Matrix<Scalar>& m,
                              ParamRole, bool) {
    ok = ok && k < shapes.size() && shapes[k].first == m.rows() &&
         shapes[k].second == m.cols();
    ++k;
  });
  if (!ok || k != shapes.size()) {
    throw ConsistencyError("lstm_backward: gradient buffers do not mirror params");
  }
}

}  // namespace internal

template <typename Scalar>
LstmParams<Scalar> LstmParams<Scalar>::Zeros(LstmVariant variant, Index input,
                                             Index hidden, Index projection,
                                             LstmOptions options) {
  if (input <= 0 || hidden <= 0) {
    throw DimensionError("lstm: sizes must be positive");
  }
  if (variant == LstmVariant::kProjected && projection <= 0) {
    throw DimensionError("lstmp: projection size must be positive");
  }
  LstmParams p;
  p.variant = variant;
  if (variant != LstmVariant::kSemiTied) options = {};
  p.options = options;
  const Index state = variant == LstmVariant::kProjected ? projection : hidden;
  const int n_mat = variant == LstmVariant::kSemiTied ? 1 : kLstmUnits;
  const int n_bias =
      variant == LstmVariant::kSemiTied && !options.untie_b ? 1 : kLstmUnits;
  const int n_peep = variant == LstmVariant::kSemiTied && !options.untie_v ? 1 : 3;
  p.w.assign(n_mat, Matrix<Scalar>::Zero(hidden, input));
  p.u.assign(n_mat, Matrix<Scalar>::Zero(hidden, state));
  if (variant == LstmVariant::kProjected) {
    p.proj = Matrix<Scalar>::Zero(projection, hidden);
  }
  p.b.assign(n_bias, Matrix<Scalar>::Zero(1, hidden));
  p.v.assign(n_peep, Matrix<Scalar>::Zero(1, hidden));
  if (variant == LstmVariant::kSemiTied) {
    for (int k = 0; k < kLstmUnits; ++k) {
      p.acts[k] = ActParams<Scalar>::Identity(internal::UnitKind(k), hidden,
                                              options.frozen_eta);
    }
  }
  return p;
}

template <typename Scalar>
LstmParams<Scalar> LstmParams<Scalar>::Init(LstmVariant variant, Index input,
                                            Index hidden, Index projection,
                                            LstmOptions options, Rng& rng) {
  LstmParams p = Zeros(variant, input, hidden, projection, options);
  auto fill = [&rng](Matrix<Scalar>& m) {
    const Scalar k = Scalar(1) / std::sqrt(static_cast<Scalar>(m.cols()));
    m = RandomUniform<Scalar>(m.rows(), m.cols(), -k, k, rng);
  };
  for (auto& m : p.w) fill(m);
  for (auto& m : p.u) fill(m);
  if (p.projected()) fill(p.proj);
  return p;
}

template <typename Scalar>
LstmStep<Scalar> lstm_forward(const LstmParams<Scalar>& p,
                              const Matrix<Scalar>& x,
                              const CellState<Scalar>& s) {
  using internal::AddRow;
  using internal::ScaleRows;
  internal::CheckLstmInputs(p, x, s);
  LstmStep<Scalar> out;
  LstmCache<Scalar>& k = out.cache;
  k.x = x;
  k.h_prev = s.h;
  k.c_prev = s.c;

  if (p.semi_tied()) {
    Matrix<Scalar> e = x * p.w[0].transpose();
    e.noalias() += s.h * p.u[0].transpose();
    if (!p.options.untie_b) AddRow(e, p.b[0]);
    for (int g = 0; g < kLstmUnits; ++g) {
      k.pre[g] = e;
      if (p.options.untie_b) AddRow(k.pre[g], p.b[g]);
    }
  } else {
    for (int g = 0; g < kLstmUnits; ++g) {
      k.pre[g] = x * p.w[g].transpose();
      k.pre[g].noalias() += s.h * p.u[g].transpose();
      AddRow(k.pre[g], p.b[g]);
    }
  }

  auto activate = [&](int g) {
    if (p.semi_tied()) {
      k.inner[g] = act_inner(internal::UnitKind(g), k.pre[g], p.acts[g]);
      k.value[g] = act_scale(k.inner[g], p.acts[g]);
    } else {
      k.inner[g] = g == kCandidate ? Matrix<Scalar>(k.pre[g].array().tanh())
                                   : sigmoid(k.pre[g]);
      k.value[g] = k.inner[g];
    }
  };

  k.pre[kInputGate] += ScaleRows(s.c, p.v[p.peephole_index(kInputGate)]);
  k.pre[kForgetGate] += ScaleRows(s.c, p.v[p.peephole_index(kForgetGate)]);
  activate(kInputGate);
  activate(kForgetGate);
  activate(kCandidate);

  k.c = k.value[kForgetGate].cwiseProduct(s.c) +
        k.value[kInputGate].cwiseProduct(k.value[kCandidate]);
  k.pre[kOutputGate] += ScaleRows(k.c, p.v[p.peephole_index(kOutputGate)]);
  activate(kOutputGate);
  k.tanh_c = k.c.array().tanh().matrix();
  k.m = k.value[kOutputGate].cwiseProduct(k.tanh_c);

  out.h = p.projected() ? Matrix<Scalar>(k.m * p.proj.transpose()) : k.m;
  out.state.c = k.c;
  out.state.h = out.h;
  return out;
}

template <typename Scalar>
LstmStep<Scalar> lstm_step(const LstmParams<Scalar>& p,
                           const Matrix<Scalar>& x, const CellState<Scalar>& s) {
  if (p.variant != LstmVariant::kStandard) {
    throw UsageError("lstm_step: params are not a standard LSTM");
  }
  return lstm_forward(p, x, s);
}

template <typename Scalar>
LstmStep<Scalar> lstmp_step(const LstmParams<Scalar>& p,
                            const Matrix<Scalar>& x,
                            const CellState<Scalar>& s) {
  if (p.variant != LstmVariant::kProjected) {
    throw UsageError("lstmp_step: params are not a projected LSTM");
  }
  return lstm_forward(p, x, s);
}

template <typename Scalar>
LstmStep<Scalar> stu_lstm_step(const LstmParams<Scalar>& p,
                               const Matrix<Scalar>& x,
                               const CellState<Scalar>& s) {
  if (p.variant != LstmVariant::kSemiTied) {
    throw UsageError("stu_lstm_step: params are not a semi-tied LSTM");
  }
  return lstm_forward(p, x, s);
}

template <typename Scalar>
LstmInputGrads<Scalar> lstm_backward(const LstmParams<Scalar>& p,
                                     const LstmCache<Scalar>& k,
                                     const Matrix<Scalar>& d_h,
                                     const Matrix<Scalar>& d_c,
                                     LstmParams<Scalar>& grads) {
  using internal::ColumnSum;
  using internal::ScaleRows;
  const Index batch = k.x.rows();
  const Index hidden = p.hidden_size();
  if (k.x.cols() != p.input_size() || k.c.cols() != hidden ||
      k.h_prev.cols() != p.output_size()) {
    throw ConsistencyError("lstm_backward: cache was not produced by these params");
  }
  if (d_h.rows() != batch || d_h.cols() != p.output_size()) {
    throw DimensionError("lstm_backward: d_h " + ShapeString(d_h) +
                         " does not match output " + ShapeString(k.m));
  }
  if (d_c.size() != 0) CheckSameShape(d_c, k.c, "lstm_backward d_c");
  internal::CheckGradShapes(p, grads);

  Matrix<Scalar> d_m;
  if (p.projected()) {
    d_m = d_h * p.proj;
    grads.proj.noalias() += d_h.transpose() * k.m;
  } else {
    d_m = d_h;
  }

  std::array<Matrix<Scalar>, kLstmUnits> d_pre;
  auto unit_backward = [&](int g, const Matrix<Scalar>& d_value) {
    if (p.semi_tied()) {
      ActGrads<Scalar> ag = act_backward_cached(
          internal::UnitKind(g), k.pre[g], k.inner[g], p.acts[g], d_value);
      grads.acts[g].eta += ag.d_eta;
      grads.acts[g].gamma += ag.d_gamma;
      d_pre[g] = std::move(ag.d_a);
    } else if (g == kCandidate) {
      d_pre[g] = (d_value.array() * (Scalar(1) - k.inner[g].array().square()))
                     .matrix();
    } else {
      d_pre[g] = (d_value.array() * k.inner[g].array() *
                  (Scalar(1) - k.inner[g].array()))
                     .matrix();
    }
  };

  // Output gate, then the cell (which also feeds the output-gate peephole).
  unit_backward(kOutputGate, d_m.cwiseProduct(k.tanh_c));
  Matrix<Scalar> d_cell =
      (d_m.array() * k.value[kOutputGate].array() *
       (Scalar(1) - k.tanh_c.array().square()))
          .matrix();
  if (d_c.size() != 0) d_cell += d_c;
  const int vo = p.peephole_index(kOutputGate);
  d_cell += ScaleRows(d_pre[kOutputGate], p.v[vo]);
  grads.v[vo] += ColumnSum<Scalar>(d_pre[kOutputGate].cwiseProduct(k.c));

  unit_backward(kInputGate, d_cell.cwiseProduct(k.value[kCandidate]));
  unit_backward(kForgetGate, d_cell.cwiseProduct(k.c_prev));
  unit_backward(kCandidate, d_cell.cwiseProduct(k.value[kInputGate]));

  LstmInputGrads<Scalar> out;
  out.d_c_prev = d_cell.cwiseProduct(k.value[kForgetGate]);
  for (int g : {kInputGate, kForgetGate}) {
    const int vi = p.peephole_index(g);
    out.d_c_prev += ScaleRows(d_pre[g], p.v[vi]);
    grads.v[vi] += ColumnSum<Scalar>(d_pre[g].cwiseProduct(k.c_prev));
  }

  if (p.semi_tied()) {
    // Every unit reads the shared e_t, so its gradient is the sum over units.
    Matrix<Scalar> d_e = d_pre[0];
    for (int g = 1; g < kLstmUnits; ++g) d_e += d_pre[g];
    grads.w[0].noalias() += d_e.transpose() * k.x;
    grads.u[0].noalias() += d_e.transpose() * k.h_prev;
    if (p.options.untie_b) {
      for (int g = 0; g < kLstmUnits; ++g) grads.b[g] += ColumnSum(d_pre[g]);
    } else {
      grads.b[0] += ColumnSum(d_e);
    }
    out.d_x = d_e * p.w[0];
    out.d_h_prev = d_e * p.u[0];
  } else {
    out.d_x = Matrix<Scalar>::Zero(batch, p.input_size());
    out.d_h_prev = Matrix<Scalar>::Zero(batch, p.output_size());
    for (int g = 0; g < kLstmUnits; ++g) {
      grads.w[g].noalias() += d_pre[g].transpose() * k.x;
      grads.u[g].noalias() += d_pre[g].transpose() * k.h_prev;
      grads.b[g] += ColumnSum(d_pre[g]);
      out.d_x.noalias() += d_pre[g] * p.w[g];
      out.d_h_prev.noalias() += d_pre[g] * p.u[g];
    }
  }
  return out;
}

template <typename Scalar>
std::vector<GateProfileRow> gate_profile(const LstmParams<Scalar>& p) {
  if (!p.semi_tied()) {
    throw UsageError("gate_profile: only semi-tied LSTM layers have a profile");
  }
  auto resting = [&](int g, Index j) {
    const auto& a = p.acts[g];
    const double eta = static_cast<double>(a.eta(0, j));
    const double gamma = static_cast<double>(a.gamma(0, j));
    return g == kCandidate ? eta * std::tanh(gamma)
                           : eta / (1.0 + std::exp(-gamma));
  };
  std::vector<GateProfileRow> rows;
  rows.reserve(p.hidden_size());
  for (Index j = 0; j < p.hidden_size(); ++j) {
    rows.push_back({j, resting(kInputGate, j), resting(kForgetGate, j),
                    resting(kCandidate, j)});
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const GateProfileRow& a, const GateProfileRow& b) {
                     return a.input_gate > b.input_gate;
                   });
  return rows;
}

}  // namespace stu

#endif  // STU_LSTM_H_
