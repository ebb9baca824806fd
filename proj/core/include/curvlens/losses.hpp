// Copyright 2026 The curvlens Authors
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

#pragma once

#include <cstddef>
#include <memory>
#include <string>

#include "curvlens/numkit.hpp"

namespace curvlens {

/// Scalar loss L: R^N -> R with its gradient and Hessian-vector product.
/// Implementations are immutable and safe to call from many threads.
class LossFunction {
 public:
  virtual ~LossFunction() = default;

  virtual std::size_t dim() const = 0;
  /// Identifier used in output metadata, e.g. "symmetric:n=500".
  virtual std::string name() const = 0;

  double value(const DVector& theta) const;
  DVector grad(const DVector& theta) const;
  DVector hvp(const DVector& theta, const DVector& v) const;

 protected:
  virtual double value_impl(const DVector& theta) const = 0;
  virtual DVector grad_impl(const DVector& theta) const = 0;
  virtual DVector hvp_impl(const DVector& theta, const DVector& v) const = 0;
};

/// 0.5 * theta_last * (sum_{i<p} theta_i^2 - sum_{p<=i<2n} theta_i^2) with
/// dim = 2n+1, where p is the number of positive-curvature coordinates.
class SaddleLoss : public LossFunction {
 public:
  std::size_t dim() const override { return 2 * n_ + 1; }
  std::size_t n() const noexcept { return n_; }
  std::size_t positive_count() const noexcept { return positive_; }

  /// (0, ..., 0, 1), where the gradient vanishes exactly.
  DVector critical_point() const;
  /// +1 for the first p coordinates, -1 up to 2n, 0 for the last.
  DVector hessian_diagonal() const;

 protected:
  SaddleLoss(std::size_t n, std::size_t positive);

  double value_impl(const DVector& theta) const override;
  DVector grad_impl(const DVector& theta) const override;
  DVector hvp_impl(const DVector& theta, const DVector& v) const override;

 private:
  double sign(std::size_t i) const { return i < positive_ ? 1.0 : -1.0; }

  std::size_t n_;
  std::size_t positive_;
};

/// n positive and n negative curvature coordinates; trace 0 at the critical point.
class SymmetricSaddleLoss final : public SaddleLoss {
 public:
  explicit SymmetricSaddleLoss(std::size_t n);
  std::string name() const override;
};

/// ntilde positive and 2n - ntilde negative coordinates, n < ntilde <= 2n.
class AsymmetricSaddleLoss final : public SaddleLoss {
 public:
  AsymmetricSaddleLoss(std::size_t n, std::size_t ntilde);
  std::size_t ntilde() const noexcept { return positive_count(); }
  std::string name() const override;
};

/// 0.5 * sum_i d_i theta_i^2.
class DiagonalQuadraticLoss final : public LossFunction {
 public:
  explicit DiagonalQuadraticLoss(DVector d);

  std::size_t dim() const override { return static_cast<std::size_t>(d_.size()); }
  std::string name() const override;
  const DVector& diagonal() const noexcept { return d_; }

 protected:
  double value_impl(const DVector& theta) const override;
  DVector grad_impl(const DVector& theta) const override;
  DVector hvp_impl(const DVector& theta, const DVector& v) const override;

 private:
  DVector d_;
};

/// Critical point of an analytic saddle. Throws UnsupportedLoss otherwise.
DVector critical_point(const LossFunction& loss);

/// Exact Hessian diagonal of a saddle (at its critical point) or of a
/// diagonal quadratic. Throws UnsupportedLoss for other losses.
DVector closed_form_hessian_diagonal(const LossFunction& loss);

}  // namespace curvlens
