/* Copyright 2026 The redflag authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <type_traits>

namespace redflag {

/// Dense dynamic matrix, templated on scalar type.
template <typename Scalar>
using MatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Dense column vector, templated on scalar type.
template <typename Scalar>
using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Dense row vector, templated on scalar type.
template <typename Scalar>
using RowX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

/// max(0, x), elementwise. Returns an Eigen expression.
template <typename Derived>
auto relu(const Eigen::MatrixBase<Derived>& x) {
  return x.cwiseMax(typename Derived::Scalar(0));
}

/// 1 / (1 + e^-x), evaluated so neither branch overflows.
template <typename Scalar>
  requires std::is_arithmetic_v<Scalar>
Scalar sigmoid(Scalar x) {
  if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

/// Elementwise sigmoid.
template <typename Derived>
MatX<typename Derived::Scalar> sigmoid(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  return x.derived().unaryExpr([](Scalar v) { return sigmoid(v); });
}

/// Row-wise log-softmax, shifted by the row maximum for stability.
template <typename Scalar>
MatX<Scalar> log_softmax_rows(const MatX<Scalar>& x) {
  MatX<Scalar> out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const Scalar peak = x.row(r).maxCoeff();
    const RowX<Scalar> shifted = (x.row(r).array() - peak).matrix();
    const Scalar log_z = std::log(shifted.array().exp().sum());
    out.row(r) = (shifted.array() - log_z).matrix();
  }
  return out;
}

/// Row-wise softmax.
template <typename Scalar>
MatX<Scalar> softmax_rows(const MatX<Scalar>& x) {
  return log_softmax_rows(x).array().exp().matrix();
}

}  // namespace redflag
