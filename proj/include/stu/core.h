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

#ifndef STU_CORE_H_
#define STU_CORE_H_

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace stu {

// Dense row-major array. Vectors are 1xN; a minibatch of vectors is BxN with
// one sample per row.
template <typename Scalar>
using Matrix =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Tensor = Matrix<double>;
using Index = Eigen::Index;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConsistencyError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// What a trainable tensor is; drives weight decay and reporting.
enum class ParamRole { kWeight, kBias, kPeephole, kEta, kGamma, kProjection };

inline const char* ParamRoleName(ParamRole role) {
  switch (role) {
    case ParamRole::kWeight:
      return "weights";
    case ParamRole::kBias:
      return "biases";
    case ParamRole::kPeephole:
      return "peepholes";
    case ParamRole::kEta:
      return "eta";
    case ParamRole::kGamma:
      return "gamma";
    case ParamRole::kProjection:
      return "projection";
  }
  return "?";
}

template <typename Derived>
std::string ShapeString(const Eigen::EigenBase<Derived>& m) {
  return "(" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ")";
}

template <typename A, typename B>
void CheckSameShape(const Eigen::EigenBase<A>& a, const Eigen::EigenBase<B>& b,
                    const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(what) + ": shape mismatch " +
                         ShapeString(a) + " vs " + ShapeString(b));
  }
}

template <typename Scalar>
Matrix<Scalar> matmul(const Matrix<Scalar>& a, const Matrix<Scalar>& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions differ, " + ShapeString(a) +
                         " * " + ShapeString(b));
  }
  return a * b;
}

template <typename Scalar>
Matrix<Scalar> hadamard(const Matrix<Scalar>& a, const Matrix<Scalar>& b) {
  CheckSameShape(a, b, "hadamard");
  return a.cwiseProduct(b);
}

// Counter-based generator: output k is SplitMix64's finaliser applied to
// seed + (k + 1) * golden-ratio increment. The stream depends only on
// (seed, counter), so it is identical on every platform and trivially
// checkpointed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0, std::uint64_t counter = 0)
      : seed_(seed), counter_(counter) {}

  std::uint64_t NextU64();
  // Uniform on [0, 1) with 53 bits of mantissa.
  double Uniform();
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }
  // Standard normal via Box-Muller; consumes two draws.
  double Normal();
  // Uniform integer in [0, n).
  std::uint64_t Below(std::uint64_t n);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

  friend bool operator==(const Rng&, const Rng&) = default;

 private:
  std::uint64_t seed_;
  std::uint64_t counter_;
};

template <typename Scalar>
Matrix<Scalar> RandomUniform(Index rows, Index cols, Scalar lo, Scalar hi,
                             Rng& rng) {
  Matrix<Scalar> m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) {
    m.data()[i] = static_cast<Scalar>(rng.Uniform(lo, hi));
  }
  return m;
}

}  // namespace stu

#endif  // STU_CORE_H_
