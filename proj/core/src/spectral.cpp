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

#include "curvlens/spectral.hpp"

#include <cmath>
#include <limits>

#include <json.hpp>

#include "curvlens/errors.hpp"

namespace curvlens {

LinearOperator hvp_operator(const LossFunction& loss, DVector theta) {
  require_same_dim(static_cast<Eigen::Index>(loss.dim()), theta.size(), "hvp_operator");
  return [&loss, theta = std::move(theta)](const DVector& v) { return loss.hvp(theta, v); };
}

LinearOperator matrix_operator(SymMatrix m) {
  return [m = std::move(m)](const DVector& v) { return m.apply(v); };
}

LinearOperator shifted_operator(LinearOperator op, double shift) {
  return [op = std::move(op), shift](const DVector& v) -> DVector { return op(v) - shift * v; };
}

namespace {

void check_symmetry(const LinearOperator& op, std::size_t dim, double tol, RngStream& rng,
                    std::size_t& matvecs) {
  const DVector u = gaussian_vector(dim, rng);
  const DVector w = gaussian_vector(dim, rng);
  const DVector hu = op(u);
  const DVector hw = op(w);
  matvecs += 2;
  require_same_dim(static_cast<Eigen::Index>(dim), hu.size(), "operator output");
  const double scale = hw.norm() * u.norm() + hu.norm() * w.norm();
  const double gap = std::abs(dot(u, hw) - dot(w, hu));
  if (gap > tol * scale) {
    throw OperatorError("operator is not symmetric: |u.Hw - w.Hu| = " + std::to_string(gap) +
                        " exceeds " + std::to_string(tol) + " * " + std::to_string(scale));
  }
}

}  // namespace

EigenPair lanczos_extreme(const LinearOperator& op, std::size_t dim, const LanczosOptions& opts,
                          RngStream rng) {
  require_dim(dim, "lanczos_extreme");
  const auto n = static_cast<Eigen::Index>(dim);
  std::size_t matvecs = 0;
  if (opts.symmetry_tol > 0.0) check_symmetry(op, dim, opts.symmetry_tol, rng, matvecs);

  DVector start = gaussian_vector(dim, rng);
  start.normalize();
  const auto m = static_cast<Eigen::Index>(std::min(dim, std::max<std::size_t>(opts.krylov_dim, 1)));
  double best_residual = std::numeric_limits<double>::infinity();

  DMatrix basis(n, m);
  DVector alpha(m), beta(m);
  const std::size_t restarts = std::max<std::size_t>(opts.max_iter, 1);

  for (std::size_t restart = 0; restart < restarts; ++restart) {
    basis.col(0) = start;
    Eigen::Index k = 0;
    double anorm = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      DVector w = op(basis.col(j));
      ++matvecs;
      const double a = basis.col(j).dot(w);
      w -= a * basis.col(j);
      if (j > 0) w -= beta[j - 1] * basis.col(j - 1);
      // Full reorthogonalization, two passes of classical Gram-Schmidt.
      for (int pass = 0; pass < 2; ++pass) {
        const DVector coeffs = basis.leftCols(j + 1).transpose() * w;
        w -= basis.leftCols(j + 1) * coeffs;
      }
      alpha[j] = a;
      k = j + 1;
      const double b = w.norm();
      anorm = std::max(anorm, std::abs(a) + b + (j > 0 ? beta[j - 1] : 0.0));
      if (j + 1 == m) break;
      // Invariant subspace: the Ritz pairs below are exact.
      if (b <= 1e-12 * std::max(anorm, std::numeric_limits<double>::min())) break;
      beta[j] = b;
      basis.col(j + 1) = w / b;
    }

    Eigen::SelfAdjointEigenSolver<DMatrix> tri;
    if (k == 1) {
      tri.compute(DMatrix::Constant(1, 1, alpha[0]));
    } else {
      tri.computeFromTridiagonal(alpha.head(k), beta.head(k - 1), Eigen::ComputeEigenvectors);
    }
    if (tri.info() != Eigen::Success) {
      throw ConvergenceError("lanczos_extreme: tridiagonal eigensolve failed", best_residual);
    }
    Eigen::Index target = 0;
    for (Eigen::Index i = 1; i < k; ++i)
      if (std::abs(tri.eigenvalues()[i]) > std::abs(tri.eigenvalues()[target])) target = i;

    DVector y = basis.leftCols(k) * tri.eigenvectors().col(target);
    y.normalize();
    const DVector hy = op(y);
    ++matvecs;
    const double lambda = y.dot(hy);
    const double residual = (hy - lambda * y).norm();
    best_residual = std::min(best_residual, residual);
    if (residual <= opts.tol * std::max(std::abs(lambda), 1.0)) {
      return EigenPair{lambda, std::move(y), residual, matvecs, restart};
    }
    start = std::move(y);
  }
  throw ConvergenceError("lanczos_extreme: no convergence after " + std::to_string(restarts) +
                             " restarts (best residual " + std::to_string(best_residual) + ")",
                         best_residual);
}

EigenPair annihilate_opposite(const LinearOperator& op, double lambda1, std::size_t dim,
                              const LanczosOptions& opts, RngStream rng) {
  EigenPair shifted = lanczos_extreme(shifted_operator(op, lambda1), dim, opts, std::move(rng));
  shifted.value += lambda1;
  return shifted;
}

HessianDirections dominant_hessian_directions(const LinearOperator& op, std::size_t dim,
                                              const LanczosOptions& opts, const RngStream& rng) {
  EigenPair first = lanczos_extreme(op, dim, opts, rng.substream(0));
  EigenPair second = annihilate_opposite(op, first.value, dim, opts, rng.substream(1));
  HessianDirections hd;
  if (first.value >= 0.0) {
    hd.max_pair = std::move(first);
    hd.min_pair = std::move(second);
  } else {
    hd.max_pair = std::move(second);
    hd.min_pair = std::move(first);
  }
  // An eigenvalue within its residual of zero has no resolvable sign.
  const double zmax = std::max(hd.max_pair.residual, kDefaultZeroTol);
  const double zmin = std::max(hd.min_pair.residual, kDefaultZeroTol);
  hd.opposite_sign_found = hd.max_pair.value > zmax && hd.min_pair.value < -zmin;
  return hd;
}

HessianDirections dominant_hessian_directions(const LossFunction& loss, const DVector& theta_star,
                                              const LanczosOptions& opts, const RngStream& rng) {
  return dominant_hessian_directions(hvp_operator(loss, theta_star), loss.dim(), opts, rng);
}

std::size_t hessian_index(const SymMatrix& h, double tol_zero, std::size_t limit) {
  const DenseEigen eig = sym_eigen(h, limit);
  std::size_t count = 0;
  for (double v : eig.values)
    if (v < -tol_zero) ++count;
  return count;
}

std::size_t hessian_index(const DVector& diagonal, double tol_zero) {
  std::size_t count = 0;
  for (double v : diagonal)
    if (v < -tol_zero) ++count;
  return count;
}

std::vector<double> rayleigh_quotient_sequence(const LinearOperator& op, double lambda1,
                                               const DVector& z0, std::size_t k_max) {
  const double n0 = z0.norm();
  if (n0 == 0.0) throw BreakdownError("rayleigh_quotient_sequence: z0 is zero");
  const LinearOperator shifted = shifted_operator(op, lambda1);
  std::vector<double> out;
  out.reserve(k_max);
  DVector z = shifted(z0 / n0);
  for (std::size_t k = 1; k <= k_max; ++k) {
    const double nz = z.norm();
    if (!(nz > std::numeric_limits<double>::min())) {
      throw BreakdownError("rayleigh_quotient_sequence: iterate " + std::to_string(k) +
                           " vanished");
    }
    z /= nz;
    DVector bz = shifted(z);
    out.push_back(z.dot(bz));
    z = std::move(bz);
  }
  return out;
}

std::string hessian_directions_json(const HessianDirections& hd, const RunInfo& run,
                                    const std::string& loss_name) {
  nlohmann::ordered_json j;
  j["command"] = run.command;
  j["version"] = version_string();
  j["config"] = nlohmann::ordered_json::parse(run.config_json);
  j["seed"] = run.seed;
  j["loss"] = loss_name;
  j["max_eigenvalue"] = hd.max_pair.value;
  j["min_eigenvalue"] = hd.min_pair.value;
  j["opposite_sign_found"] = hd.opposite_sign_found;
  j["residuals"] = {{"max", hd.max_pair.residual}, {"min", hd.min_pair.residual}};
  j["iterations"] = {{"max", hd.max_pair.matvecs}, {"min", hd.min_pair.matvecs}};
  j["restarts"] = {{"max", hd.max_pair.restarts}, {"min", hd.min_pair.restarts}};
  return j.dump(2) + "\n";
}

}  // namespace curvlens
