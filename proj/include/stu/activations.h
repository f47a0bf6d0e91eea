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

// Parameterised activation functions with per-node output scale (eta) and
// input scale (gamma):
//
//   sigmoid_{eta,gamma}(a) = eta * sigmoid(gamma * a)
//   tanh_{eta,gamma}(a)    = eta * tanh(gamma * a)
//   relu_{eta}(a)          = eta * max(a, 0)
//
// All functions operate on a BxN minibatch; eta and gamma are 1xN and are
// broadcast over rows. Parameter gradients are reduced over the batch.

#ifndef STU_ACTIVATIONS_H_
#define STU_ACTIVATIONS_H_

#include <cmath>
#include <string>

#include "stu/core.h"

namespace stu {

enum class ActKind { kPSigmoid, kPTanh, kPReLU };

inline const char* ActKindName(ActKind kind) {
  switch (kind) {
    case ActKind::kPSigmoid:
      return "psigmoid";
    case ActKind::kPTanh:
      return "ptanh";
    case ActKind::kPReLU:
      return "prelu";
  }
  return "?";
}

template <typename Scalar>
struct ActParams {
  Matrix<Scalar> eta;    // 1xN
  Matrix<Scalar> gamma;  // 1xN; empty for kPReLU
  bool frozen_eta = false;

  // Identity start: eta = 1, gamma = 1.
  static ActParams Identity(ActKind kind, Index n, bool frozen_eta = false) {
    ActParams p;
    p.eta = Matrix<Scalar>::Ones(1, n);
    if (kind != ActKind::kPReLU) p.gamma = Matrix<Scalar>::Ones(1, n);
    p.frozen_eta = frozen_eta;
    return p;
  }

  Index size() const { return eta.cols(); }
};

template <typename Scalar>
struct ActGrads {
  Matrix<Scalar> d_a;      // BxN
  Matrix<Scalar> d_eta;    // 1xN
  Matrix<Scalar> d_gamma;  // 1xN, zero for kPReLU
};

namespace internal {

template <typename Scalar>
void CheckActShapes(ActKind kind, const Matrix<Scalar>& a,
                    const ActParams<Scalar>& p, const char* what) {
  if (p.eta.rows() != 1 || p.eta.cols() != a.cols()) {
    throw DimensionError(std::string(what) + ": eta " + ShapeString(p.eta) +
                         " does not match activations " + ShapeString(a));
  }
  if (kind != ActKind::kPReLU &&
      (p.gamma.rows() != 1 || p.gamma.cols() != a.cols())) {
    throw DimensionError(std::string(what) + ": gamma " +
                         ShapeString(p.gamma) + " does not match activations " +
                         ShapeString(a));
  }
}

}  // namespace internal

// Plain logistic sigmoid, elementwise. 1/(1+exp(-x)) saturates cleanly to 0
// or 1 in IEEE arithmetic, so no branch is needed.
template <typename Scalar>
Matrix<Scalar> sigmoid(const Matrix<Scalar>& a) {
  return (Scalar(1) + (-a.array()).exp()).inverse().matrix();
}

// The unscaled activation f(gamma * a) for sigmoid/tanh, or max(a, 0) for
// ReLU. The layers cache it so the backward pass needs no transcendentals.
template <typename Scalar>
Matrix<Scalar> act_inner(ActKind kind, const Matrix<Scalar>& a,
                         const ActParams<Scalar>& p) {
  internal::CheckActShapes(kind, a, p, "act_forward");
  switch (kind) {
    case ActKind::kPSigmoid:
      return sigmoid<Scalar>(
          (a.array().rowwise() * p.gamma.row(0).array()).matrix());
    case ActKind::kPTanh:
      return (a.array().rowwise() * p.gamma.row(0).array()).tanh().matrix();
    case ActKind::kPReLU:
      return a.cwiseMax(Scalar(0));
  }
  return {};
}

template <typename Scalar>
Matrix<Scalar> act_scale(const Matrix<Scalar>& inner,
                         const ActParams<Scalar>& p) {
  return (inner.array().rowwise() * p.eta.row(0).array()).matrix();
}

template <typename Scalar>
Matrix<Scalar> act_forward(ActKind kind, const Matrix<Scalar>& a,
                           const ActParams<Scalar>& p) {
  return act_scale(act_inner(kind, a, p), p);
}

// Derivatives per node j, weighted by the upstream gradient u and written
// in terms of the cached inner value:
//   sigmoid: d/da = eta*gamma*s*(1-s), d/deta = s, d/dgamma = eta*a*s*(1-s)
//            where s = sigmoid(gamma*a) and s*(1-s) = e^{-ga}/(1+e^{-ga})^2.
//   tanh:    d/da = eta*gamma*(1-t^2), d/deta = t, d/dgamma = eta*a*(1-t^2)
//            where t = tanh(gamma*a) and 1-t^2 = 4/(e^{ga}+e^{-ga})^2.
//   relu:    d/da = eta if a >= 0 else 0, d/deta = max(a, 0).
template <typename Scalar>
ActGrads<Scalar> act_backward_cached(ActKind kind, const Matrix<Scalar>& a,
                                     const Matrix<Scalar>& inner,
                                     const ActParams<Scalar>& p,
                                     const Matrix<Scalar>& upstream) {
  internal::CheckActShapes(kind, a, p, "act_backward");
  CheckSameShape(a, upstream, "act_backward");
  CheckSameShape(a, inner, "act_backward");
  const auto eta = p.eta.row(0).array();
  ActGrads<Scalar> g;
  g.d_eta = (upstream.array() * inner.array()).colwise().sum().matrix();
  if (kind == ActKind::kPReLU) {
    g.d_a = (a.array() >= Scalar(0))
                .select(upstream.array().rowwise() * eta, Scalar(0))
                .matrix();
    g.d_gamma = Matrix<Scalar>::Zero(1, a.cols());
    return g;
  }
  Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> slope;
  if (kind == ActKind::kPSigmoid) {
    slope = inner.array() * (Scalar(1) - inner.array());
  } else {
    slope = Scalar(1) - inner.array().square();
  }
  // u * eta * slope, shared by both input- and slope-gradients.
  const auto scaled = ((upstream.array() * slope).rowwise() * eta).eval();
  g.d_a = (scaled.rowwise() * p.gamma.row(0).array()).matrix();
  g.d_gamma = (scaled * a.array()).colwise().sum().matrix();
  return g;
}

template <typename Scalar>
ActGrads<Scalar> act_backward(ActKind kind, const Matrix<Scalar>& a,
                              const ActParams<Scalar>& p,
                              const Matrix<Scalar>& upstream) {
  return act_backward_cached(kind, a, act_inner(kind, a, p), p, upstream);
}

}  // namespace stu

#endif  // STU_ACTIVATIONS_H_
