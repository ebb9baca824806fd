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

// Matrix-free extreme eigenpairs of a symmetric operator v -> H v.
//
// lanczos_extreme finds the largest-magnitude eigenvalue. annihilate_opposite
// then runs the same solve on H - lambda1*I, whose dominant eigenvalue is
// lambda_k - lambda1 where lambda_k is the largest-magnitude eigenvalue of the
// opposite sign (provided |lambda_k - lambda1| dominates every other gap).
// dominant_hessian_directions combines the two and assigns (max, min) by the
// sign of lambda1.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "curvlens/io.hpp"
#include "curvlens/losses.hpp"
#include "curvlens/numkit.hpp"

namespace curvlens {

/// Symmetric linear operator given by its action.
using LinearOperator = std::function<DVector(const DVector&)>;

LinearOperator hvp_operator(const LossFunction& loss, DVector theta);
LinearOperator matrix_operator(SymMatrix m);
/// v -> op(v) - shift * v
LinearOperator shifted_operator(LinearOperator op, double shift);

struct EigenPair {
  double value = 0.0;
  DVector vector;
  /// ||H v - lambda v||_2, recomputed with one extra application.
  double residual = 0.0;
  /// Operator applications spent, including the residual check.
  std::size_t matvecs = 0;
  std::size_t restarts = 0;
};

struct LanczosOptions {
  double tol = 1e-8;
  /// Restart budget.
  std::size_t max_iter = 10;
  /// Krylov dimension per restart is min(dim, krylov_dim).
  std::size_t krylov_dim = 200;
  /// Relative tolerance for the two-probe symmetry check. <= 0 disables it.
  double symmetry_tol = 1e-6;
};

/// Largest-magnitude eigenpair with residual <= tol * max(|lambda|, 1).
/// Explicitly restarted Lanczos with full reorthogonalization. The start
/// vector and symmetry probes come from `rng`. Throws ConvergenceError (with
/// the best residual) or OperatorError.
EigenPair lanczos_extreme(const LinearOperator& op, std::size_t dim,
                          const LanczosOptions& opts, RngStream rng);

/// Solves on op - lambda1*I and shifts the eigenvalue back. The residual is
/// that of the returned pair with respect to `op`.
EigenPair annihilate_opposite(const LinearOperator& op, double lambda1, std::size_t dim,
                              const LanczosOptions& opts, RngStream rng);

struct HessianDirections {
  EigenPair max_pair;
  EigenPair min_pair;
  /// False when both eigenvalues found share a sign (or one is zero): the
  /// Hessian looks definite or semidefinite and no saddle direction exists.
  bool opposite_sign_found = false;
};

/// First solve uses rng.substream(0), the annihilation solve rng.substream(1).
HessianDirections dominant_hessian_directions(const LinearOperator& op, std::size_t dim,
                                              const LanczosOptions& opts, const RngStream& rng);
HessianDirections dominant_hessian_directions(const LossFunction& loss, const DVector& theta_star,
                                              const LanczosOptions& opts, const RngStream& rng);

inline constexpr double kDefaultZeroTol = 1e-10;

/// Number of eigenvalues below -tol_zero.
std::size_t hessian_index(const SymMatrix& h, double tol_zero = kDefaultZeroTol,
                          std::size_t limit = kDefaultOracleLimit);
std::size_t hessian_index(const DVector& diagonal, double tol_zero = kDefaultZeroTol);

/// Rayleigh quotients lambda^(k) = z_k.B z_k / z_k.z_k, k = 1..k_max, of the
/// power iteration z_k = B z_{k-1} with B = op - lambda1*I. Iterates are
/// renormalized each step (the quotient is scale-free). Throws BreakdownError
/// if an iterate vanishes.
std::vector<double> rayleigh_quotient_sequence(const LinearOperator& op, double lambda1,
                                               const DVector& z0, std::size_t k_max);

std::string hessian_directions_json(const HessianDirections& hd, const RunInfo& run,
                                    const std::string& loss_name);

}  // namespace curvlens
