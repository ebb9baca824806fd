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

#include "curvlens/losses.hpp"

#include <cmath>
#include <sstream>

#include "curvlens/errors.hpp"

namespace curvlens {

namespace {

void check_theta(const LossFunction& loss, const DVector& theta) {
  require_same_dim(static_cast<Eigen::Index>(loss.dim()), theta.size(),
                   "loss evaluation");
}

std::string format_number(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

}  // namespace

double LossFunction::value(const DVector& theta) const {
  check_theta(*this, theta);
  return value_impl(theta);
}

DVector LossFunction::grad(const DVector& theta) const {
  check_theta(*this, theta);
  return grad_impl(theta);
}

DVector LossFunction::hvp(const DVector& theta, const DVector& v) const {
  check_theta(*this, theta);
  check_theta(*this, v);
  return hvp_impl(theta, v);
}

// ---------------------------------------------------------------------------

SaddleLoss::SaddleLoss(std::size_t n, std::size_t positive) : n_(n), positive_(positive) {
  require_dim(n, "SaddleLoss");
}

DVector SaddleLoss::critical_point() const {
  DVector p = DVector::Zero(static_cast<Eigen::Index>(dim()));
  p[p.size() - 1] = 1.0;
  return p;
}

DVector SaddleLoss::hessian_diagonal() const {
  DVector d = DVector::Zero(static_cast<Eigen::Index>(dim()));
  for (std::size_t i = 0; i < 2 * n_; ++i) d[static_cast<Eigen::Index>(i)] = sign(i);
  return d;
}

double SaddleLoss::value_impl(const DVector& theta) const {
  double s = 0.0;
  for (std::size_t i = 0; i < 2 * n_; ++i) {
    const double t = theta[static_cast<Eigen::Index>(i)];
    s += sign(i) * t * t;
  }
  return 0.5 * theta[static_cast<Eigen::Index>(2 * n_)] * s;
}

DVector SaddleLoss::grad_impl(const DVector& theta) const {
  const auto last = static_cast<Eigen::Index>(2 * n_);
  DVector g(theta.size());
  double s = 0.0;
  for (Eigen::Index i = 0; i < last; ++i) {
    const double si = sign(static_cast<std::size_t>(i));
    g[i] = theta[last] * si * theta[i];
    s += si * theta[i] * theta[i];
  }
  g[last] = 0.5 * s;
  return g;
}

// H = [[theta_last * S, S theta], [(S theta)^T, 0]] with S = diag(signs).
DVector SaddleLoss::hvp_impl(const DVector& theta, const DVector& v) const {
  const auto last = static_cast<Eigen::Index>(2 * n_);
  DVector out(theta.size());
  double tail = 0.0;
  for (Eigen::Index i = 0; i < last; ++i) {
    const double si = sign(static_cast<std::size_t>(i));
    out[i] = si * (theta[last] * v[i] + theta[i] * v[last]);
    tail += si * theta[i] * v[i];
  }
  out[last] = tail;
  return out;
}

SymmetricSaddleLoss::SymmetricSaddleLoss(std::size_t n) : SaddleLoss(n, n) {}

std::string SymmetricSaddleLoss::name() const {
  return "symmetric:n=" + std::to_string(n());
}

namespace {
std::size_t checked_ntilde(std::size_t n, std::size_t ntilde) {
  if (!(n < ntilde && ntilde <= 2 * n)) {
    throw InvalidDimension("AsymmetricSaddleLoss: need n < ntilde <= 2n (n=" +
                           std::to_string(n) + ", ntilde=" + std::to_string(ntilde) + ")");
  }
  return ntilde;
}
}  // namespace

AsymmetricSaddleLoss::AsymmetricSaddleLoss(std::size_t n, std::size_t ntilde)
    : SaddleLoss(n, checked_ntilde(n, ntilde)) {}

std::string AsymmetricSaddleLoss::name() const {
  return "asymmetric:n=" + std::to_string(n()) + ",ntilde=" + std::to_string(ntilde());
}

// ---------------------------------------------------------------------------

DiagonalQuadraticLoss::DiagonalQuadraticLoss(DVector d) : d_(std::move(d)) {
  require_dim(static_cast<std::size_t>(d_.size()), "DiagonalQuadraticLoss");
  if (!all_finite(d_)) throw Error("DiagonalQuadraticLoss: non-finite diagonal");
}

std::string DiagonalQuadraticLoss::name() const {
  std::string s = "quadratic:diag=";
  for (Eigen::Index i = 0; i < d_.size(); ++i) {
    if (i) s += ';';
    s += format_number(d_[i]);
  }
  return s;
}

double DiagonalQuadraticLoss::value_impl(const DVector& theta) const {
  double s = 0.0;
  for (Eigen::Index i = 0; i < d_.size(); ++i) s += d_[i] * theta[i] * theta[i];
  return 0.5 * s;
}

DVector DiagonalQuadraticLoss::grad_impl(const DVector& theta) const {
  return d_.cwiseProduct(theta);
}

DVector DiagonalQuadraticLoss::hvp_impl(const DVector&, const DVector& v) const {
  return d_.cwiseProduct(v);
}

// ---------------------------------------------------------------------------

DVector critical_point(const LossFunction& loss) {
  if (const auto* saddle = dynamic_cast<const SaddleLoss*>(&loss)) {
    return saddle->critical_point();
  }
  throw UnsupportedLoss("critical_point: no designated critical point for " + loss.name());
}

DVector closed_form_hessian_diagonal(const LossFunction& loss) {
  if (const auto* saddle = dynamic_cast<const SaddleLoss*>(&loss)) {
    return saddle->hessian_diagonal();
  }
  if (const auto* quad = dynamic_cast<const DiagonalQuadraticLoss*>(&loss)) {
    return quad->diagonal();
  }
  throw UnsupportedLoss("closed_form_hessian_diagonal: no closed form for " + loss.name());
}

}  // namespace curvlens
