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

// Feed-forward family: plain dense layers, highway layers
//
//   y = m o y~ + r o x          (independent carry, the default)
//   y = m o y~ + (1 - m) o x    (coupled carry)
//
// with m, r, y~ each from their own affine map, and the semi-tied highway
// layer where all three read e = W x + b through parameterised activations.

#ifndef STU_HIGHWAY_H_
#define STU_HIGHWAY_H_

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "stu/activations.h"
#include "stu/core.h"

namespace stu {

enum class HighwayVariant { kPlainDense, kHighway, kSemiTiedHighway };
enum class CandidateKind { kSigmoid, kReLU };
enum class CarryMode { kIndependent, kCoupled };

// Unit order for per-unit arrays: transform gate, candidate, carry gate.
enum HighwayUnit { kTransformGate = 0, kCandidateUnit = 1, kCarryGate = 2 };
inline constexpr std::array<const char*, 3> kHighwayUnitSuffix = {"m", "y",
                                                                  "r"};

template <typename Scalar>
struct HighwayParams {
  HighwayVariant variant = HighwayVariant::kHighway;
  CandidateKind candidate = CandidateKind::kSigmoid;
  CarryMode carry = CarryMode::kIndependent;
  // kPlainDense and kSemiTiedHighway: one W (out x in) and one b (1 x out).
  // kHighway: per unit in HighwayUnit order, no carry entry when coupled.
  std::vector<Matrix<Scalar>> w;
  std::vector<Matrix<Scalar>> b;
  // kSemiTiedHighway only, HighwayUnit order; carry is unused when coupled
  // and gamma of the candidate is empty for ReLU.
  std::array<ActParams<Scalar>, 3> acts;

  bool has_carry_gate() const {
    return variant != HighwayVariant::kPlainDense &&
           carry == CarryMode::kIndependent;
  }
  Index input_size() const { return w.front().cols(); }
  Index output_size() const { return w.front().rows(); }

  static HighwayParams Zeros(HighwayVariant variant, Index input, Index output,
                             CandidateKind candidate = CandidateKind::kSigmoid,
                             CarryMode carry = CarryMode::kIndependent);
  static HighwayParams Init(HighwayVariant variant, Index input, Index output,
                            CandidateKind candidate, CarryMode carry, Rng& rng);
};

template <typename Scalar>
struct HighwayCache {
  Matrix<Scalar> x;
  std::array<Matrix<Scalar>, 3> pre;    // unit activation inputs
  std::array<Matrix<Scalar>, 3> inner;  // unscaled activation outputs
  std::array<Matrix<Scalar>, 3> value;  // m, y~, r
};

template <typename Scalar>
struct HighwayStep {
  Matrix<Scalar> y;
  HighwayCache<Scalar> cache;
};

template <typename Params, typename F>
void ForEachHighwayParam(Params& p, F&& f) {
  const bool shared = p.variant != HighwayVariant::kHighway;
  for (std::size_t k = 0; k < p.w.size(); ++k) {
    f(shared ? std::string("W") : std::string("W_") + kHighwayUnitSuffix[k],
      p.w[k], ParamRole::kWeight, true);
  }
  for (std::size_t k = 0; k < p.b.size(); ++k) {
    f(shared ? std::string("b") : std::string("b_") + kHighwayUnitSuffix[k],
      p.b[k], ParamRole::kBias, true);
  }
  if (p.variant != HighwayVariant::kSemiTiedHighway) return;
  for (int k = 0; k < 3; ++k) {
    if (k == kCarryGate && !p.has_carry_gate()) continue;
    auto& act = p.acts[k];
    f(std::string("eta_") + kHighwayUnitSuffix[k], act.eta, ParamRole::kEta,
      !act.frozen_eta);
    if (act.gamma.size() != 0) {
      f(std::string("gamma_") + kHighwayUnitSuffix[k], act.gamma,
        ParamRole::kGamma, true);
    }
  }
}

template <typename Scalar>
HighwayParams<Scalar> ZerosLike(const HighwayParams<Scalar>& p) {
  HighwayParams<Scalar> z = p;
  ForEachHighwayParam(z, [](const std::string&, Matrix<Scalar>& m, ParamRole,
                            bool) { m.setZero(); });
  return z;
}

// Dense, highway or semi-tied highway forward pass over a B x in batch.
template <typename Scalar>
HighwayStep<Scalar> highway_forward(const HighwayParams<Scalar>& p,
                                    const Matrix<Scalar>& x);

// Variant-checked entry point for the semi-tied layer.
template <typename Scalar>
HighwayStep<Scalar> stu_highway_forward(const HighwayParams<Scalar>& p,
                                        const Matrix<Scalar>& x);

// Accumulates parameter gradients into `grads` and returns dL/dx.
template <typename Scalar>
Matrix<Scalar> highway_backward(const HighwayParams<Scalar>& p,
                                const HighwayCache<Scalar>& cache,
                                const Matrix<Scalar>& d_y,
                                HighwayParams<Scalar>& grads);

// ---------------------------------------------------------------------------
// Implementation.

namespace internal {

inline ActKind HighwayUnitKind(int unit, CandidateKind candidate) {
  if (unit == kCandidateUnit && candidate == CandidateKind::kReLU) {
    return ActKind::kPReLU;
  }
  return ActKind::kPSigmoid;
}

}  // namespace internal

template <typename Scalar>
HighwayParams<Scalar> HighwayParams<Scalar>::Zeros(HighwayVariant variant,
                                                   Index input, Index output,
                                                   CandidateKind candidate,
                                                   CarryMode carry) {
  if (input <= 0 || output <= 0) {
    throw DimensionError("highway: sizes must be positive");
  }
  if (variant != HighwayVariant::kPlainDense && input != output) {
    throw DimensionError("highway: carry path needs a square layer, got " +
                         std::to_string(input) + " -> " +
                         std::to_string(output));
  }
  HighwayParams p;
  p.variant = variant;
  p.candidate = candidate;
  p.carry = variant == HighwayVariant::kPlainDense ? CarryMode::kIndependent
                                                   : carry;
  int n = 1;
  if (variant == HighwayVariant::kHighway) n = p.has_carry_gate() ? 3 : 2;
  p.w.assign(n, Matrix<Scalar>::Zero(output, input));
  p.b.assign(n, Matrix<Scalar>::Zero(1, output));
  if (variant == HighwayVariant::kSemiTiedHighway) {
    for (int k = 0; k < 3; ++k) {
      if (k == kCarryGate && !p.has_carry_gate()) continue;
      p.acts[k] = ActParams<Scalar>::Identity(
          internal::HighwayUnitKind(k, candidate), output);
    }
  }
  return p;
}

template <typename Scalar>
HighwayParams<Scalar> HighwayParams<Scalar>::Init(HighwayVariant variant,
                                                  Index input, Index output,
                                                  CandidateKind candidate,
                                                  CarryMode carry, Rng& rng) {
  HighwayParams p = Zeros(variant, input, output, candidate, carry);
  for (auto& m : p.w) {
    const Scalar k = Scalar(1) / std::sqrt(static_cast<Scalar>(m.cols()));
    m = RandomUniform<Scalar>(m.rows(), m.cols(), -k, k, rng);
  }
  return p;
}

template <typename Scalar>
HighwayStep<Scalar> highway_forward(const HighwayParams<Scalar>& p,
                                    const Matrix<Scalar>& x) {
  if (x.cols() != p.input_size()) {
    throw DimensionError("highway: input " + ShapeString(x) +
                         " but layer expects " +
                         std::to_string(p.input_size()) + " columns");
  }
  HighwayStep<Scalar> out;
  HighwayCache<Scalar>& k = out.cache;
  k.x = x;

  auto affine = [&](int idx) {
    Matrix<Scalar> a = x * p.w[idx].transpose();
    a.array().rowwise() += p.b[idx].row(0).array();
    return a;
  };
  auto plain = [&](int unit, const Matrix<Scalar>& a) -> Matrix<Scalar> {
    if (internal::HighwayUnitKind(unit, p.candidate) == ActKind::kPReLU) {
      return a.cwiseMax(Scalar(0));
    }
    return sigmoid(a);
  };

  if (p.variant == HighwayVariant::kPlainDense) {
    k.pre[kCandidateUnit] = affine(0);
    k.inner[kCandidateUnit] = plain(kCandidateUnit, k.pre[kCandidateUnit]);
    k.value[kCandidateUnit] = k.inner[kCandidateUnit];
    out.y = k.value[kCandidateUnit];
    return out;
  }

  const int n_units = p.has_carry_gate() ? 3 : 2;
  if (p.variant == HighwayVariant::kSemiTiedHighway) {
    const Matrix<Scalar> e = affine(0);
    for (int g = 0; g < n_units; ++g) {
      k.pre[g] = e;
      k.inner[g] =
          act_inner(internal::HighwayUnitKind(g, p.candidate), e, p.acts[g]);
      k.value[g] = act_scale(k.inner[g], p.acts[g]);
    }
  } else {
    for (int g = 0; g < n_units; ++g) {
      k.pre[g] = affine(g);
      k.inner[g] = plain(g, k.pre[g]);
      k.value[g] = k.inner[g];
    }
  }

  const auto& m = k.value[kTransformGate];
  out.y = m.cwiseProduct(k.value[kCandidateUnit]);
  if (p.has_carry_gate()) {
    out.y += k.value[kCarryGate].cwiseProduct(x);
  } else {
    out.y += ((Scalar(1) - m.array()) * x.array()).matrix();
  }
  return out;
}

template <typename Scalar>
HighwayStep<Scalar> stu_highway_forward(const HighwayParams<Scalar>& p,
                                        const Matrix<Scalar>& x) {
  if (p.variant != HighwayVariant::kSemiTiedHighway) {
    throw UsageError("stu_highway_forward: params are not a semi-tied highway");
  }
  return highway_forward(p, x);
}

template <typename Scalar>
Matrix<Scalar> highway_backward(const HighwayParams<Scalar>& p,
                                const HighwayCache<Scalar>& k,
                                const Matrix<Scalar>& d_y,
                                HighwayParams<Scalar>& grads) {
  if (k.x.cols() != p.input_size() ||
      k.value[kCandidateUnit].cols() != p.output_size()) {
    throw ConsistencyError(
        "highway_backward: cache was not produced by these params");
  }
  if (grads.variant != p.variant || grads.w.size() != p.w.size() ||
      grads.b.size() != p.b.size()) {
    throw ConsistencyError(
        "highway_backward: gradient buffers do not mirror params");
  }
  CheckSameShape(d_y, k.value[kCandidateUnit], "highway_backward");

  std::array<Matrix<Scalar>, 3> d_value;
  Matrix<Scalar> d_x;
  if (p.variant == HighwayVariant::kPlainDense) {
    d_value[kCandidateUnit] = d_y;
    d_x = Matrix<Scalar>::Zero(k.x.rows(), k.x.cols());
  } else {
    const auto& m = k.value[kTransformGate];
    d_value[kCandidateUnit] = d_y.cwiseProduct(m);
    if (p.has_carry_gate()) {
      d_value[kTransformGate] = d_y.cwiseProduct(k.value[kCandidateUnit]);
      d_value[kCarryGate] = d_y.cwiseProduct(k.x);
      d_x = d_y.cwiseProduct(k.value[kCarryGate]);
    } else {
      d_value[kTransformGate] =
          d_y.cwiseProduct(k.value[kCandidateUnit] - k.x);
      d_x = ((Scalar(1) - m.array()) * d_y.array()).matrix();
    }
  }

  const int first = p.variant == HighwayVariant::kPlainDense ? kCandidateUnit : 0;
  const int last = p.variant == HighwayVariant::kPlainDense
                       ? kCandidateUnit
                       : (p.has_carry_gate() ? kCarryGate : kCandidateUnit);
  std::array<Matrix<Scalar>, 3> d_pre;
  for (int g = first; g <= last; ++g) {
    const ActKind kind = internal::HighwayUnitKind(g, p.candidate);
    if (p.variant == HighwayVariant::kSemiTiedHighway) {
      ActGrads<Scalar> ag =
          act_backward_cached(kind, k.pre[g], k.inner[g], p.acts[g], d_value[g]);
      grads.acts[g].eta += ag.d_eta;
      if (grads.acts[g].gamma.size() != 0) grads.acts[g].gamma += ag.d_gamma;
      d_pre[g] = std::move(ag.d_a);
    } else if (kind == ActKind::kPReLU) {
      d_pre[g] = (k.pre[g].array() >= Scalar(0))
                     .select(d_value[g].array(), Scalar(0))
                     .matrix();
    } else {
      d_pre[g] = (d_value[g].array() * k.inner[g].array() *
                  (Scalar(1) - k.inner[g].array()))
                     .matrix();
    }
  }

  if (p.variant == HighwayVariant::kHighway) {
    for (int g = first; g <= last; ++g) {
      grads.w[g].noalias() += d_pre[g].transpose() * k.x;
      grads.b[g] += d_pre[g].colwise().sum();
      d_x.noalias() += d_pre[g] * p.w[g];
    }
  } else {
    // Shared affine map: sum over the units reading it.
    Matrix<Scalar> d_e = d_pre[first];
    for (int g = first + 1; g <= last; ++g) d_e += d_pre[g];
    grads.w[0].noalias() += d_e.transpose() * k.x;
    grads.b[0] += d_e.colwise().sum();
    d_x.noalias() += d_e * p.w[0];
  }
  return d_x;
}

}  // namespace stu

#endif  // STU_HIGHWAY_H_
