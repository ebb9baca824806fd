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

#include <gtest/gtest.h>

#include <cmath>

#include <json.hpp>

#include "curvlens/errors.hpp"
#include "curvlens/io.hpp"
#include "curvlens/losses.hpp"
#include "curvlens/mlp.hpp"
#include "curvlens/spectral.hpp"
#include "support/oracles.hpp"

namespace curvlens {
namespace {

LinearOperator diag_op(std::initializer_list<double> xs) {
  DVector d(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) d(i++) = x;
  return matrix_operator(SymMatrix::diagonal(d));
}

void expect_pair_valid(const LinearOperator& op, const EigenPair& p, double tol) {
  EXPECT_NEAR(p.vector.norm(), 1.0, 1e-10);
  const double r = (op(p.vector) - p.value * p.vector).norm();
  EXPECT_NEAR(r, p.residual, 1e-12 * std::max(1.0, std::abs(p.value)));
  EXPECT_LE(r, tol * std::max(std::abs(p.value), 1.0));
}

TEST(Lanczos, DiagonalExamples) {
  const LanczosOptions opts;
  const auto op = diag_op({5, -3, 2});
  const EigenPair p = lanczos_extreme(op, 3, opts, RngStream(1));
  EXPECT_NEAR(p.value, 5.0, 1e-12);
  EXPECT_NEAR(std::abs(p.vector(0)), 1.0, 1e-10);
  expect_pair_valid(op, p, opts.tol);
  const EigenPair q = lanczos_extreme(diag_op({-7, 6}), 2, opts, RngStream(2));
  EXPECT_NEAR(q.value, -7.0, 1e-12);
}

TEST(Lanczos, MatchesDenseLargestMagnitude) {
  RngStream rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const SymMatrix m = testing::random_symmetric(50, rng);
    const DenseEigen e = sym_eigen(m);
    const double want =
        std::abs(e.values(0)) >= std::abs(e.values(49)) ? e.values(0) : e.values(49);
    const auto op = matrix_operator(m);
    const EigenPair p = lanczos_extreme(op, 50, {}, rng.substream(trial));
    EXPECT_LE(testing::rel_err(p.value, want), 1e-8);
    expect_pair_valid(op, p, 1e-8);
  }
}

TEST(Lanczos, LargeOperatorNeedsRestarts) {
  // dim 1000 with a Krylov budget of 30 forces explicit restarts.
  RngStream rng(4);
  DVector d = DVector::LinSpaced(1000, -1.0, 1.0);
  d(0) = -1.2;
  const auto op = matrix_operator(SymMatrix::diagonal(d));
  LanczosOptions opts;
  opts.krylov_dim = 30;
  opts.max_iter = 50;
  const EigenPair p = lanczos_extreme(op, 1000, opts, rng);
  EXPECT_NEAR(p.value, -1.2, 1e-8);
  EXPECT_GT(p.restarts, 0u);
}

TEST(Lanczos, ConvergenceFailureCarriesResidual) {
  const DVector d = DVector::LinSpaced(2000, -1.0, 1.0 + 1e-4);
  const auto op = matrix_operator(SymMatrix::diagonal(d));
  LanczosOptions opts;
  opts.krylov_dim = 5;
  opts.max_iter = 1;
  opts.tol = 1e-14;
  try {
    lanczos_extreme(op, 2000, opts, RngStream(5));
    FAIL() << "expected convergence failure";
  } catch (const ConvergenceError& e) {
    EXPECT_GT(e.best_residual(), 0.0);
  }
}

TEST(Lanczos, AsymmetricOperatorRejected) {
  DMatrix m(3, 3);
  m << 1, 2, 0, 0, 1, 0, 0, 0, 1;
  const LinearOperator op = [m](const DVector& v) -> DVector { return m * v; };
  EXPECT_THROW(lanczos_extreme(op, 3, {}, RngStream(6)), OperatorError);
}

TEST(Lanczos, DimensionOne) {
  const EigenPair p = lanczos_extreme(diag_op({-2.5}), 1, {}, RngStream(1));
  EXPECT_EQ(p.value, -2.5);
}

TEST(Annihilation, HandExamples) {
  const auto op1 = diag_op({5, -3, 2});
  const EigenPair a = annihilate_opposite(op1, 5.0, 3, {}, RngStream(7));
  EXPECT_NEAR(a.value, -3.0, 1e-8 * 8);
  EXPECT_NEAR(std::abs(a.vector(1)), 1.0, 1e-8);
  const EigenPair b = annihilate_opposite(diag_op({-7, 6, 1}), -7.0, 3, {}, RngStream(8));
  EXPECT_NEAR(b.value, 6.0, 1e-8 * 13);
}

TEST(DominantDirections, DiagonalQuadratic) {
  DVector d(3);
  d << 5, -3, 2;
  const DiagonalQuadraticLoss q(d);
  const HessianDirections hd = dominant_hessian_directions(q, DVector::Zero(3), {}, RngStream(9));
  EXPECT_TRUE(hd.opposite_sign_found);
  EXPECT_NEAR(hd.max_pair.value, 5.0, 1e-8);
  EXPECT_NEAR(hd.min_pair.value, -3.0, 1e-8);
  EXPECT_NEAR(std::abs(hd.max_pair.vector(0)), 1.0, 1e-8);
  EXPECT_NEAR(std::abs(hd.min_pair.vector(1)), 1.0, 1e-8);
}

TEST(DominantDirections, DefiniteFlagged) {
  DVector d(3);
  d << 1, 2, 3;
  const DiagonalQuadraticLoss q(d);
  const HessianDirections hd = dominant_hessian_directions(q, DVector::Zero(3), {}, RngStream(10));
  EXPECT_FALSE(hd.opposite_sign_found);
  EXPECT_NEAR(hd.max_pair.value, 3.0, 1e-8);
  EXPECT_GE(hd.max_pair.value, hd.min_pair.value);
}

TEST(DominantDirections, DegenerateSaddleGivesBothSigns) {
  const AsymmetricSaddleLoss a(50, 80);
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    const HessianDirections hd =
        dominant_hessian_directions(a, critical_point(a), {}, RngStream(seed));
    EXPECT_TRUE(hd.opposite_sign_found);
    EXPECT_NEAR(hd.max_pair.value, 1.0, 1e-8);
    EXPECT_NEAR(hd.min_pair.value, -1.0, 1e-8);
    EXPECT_LE(std::abs(dot(hd.max_pair.vector, hd.min_pair.vector)), 1e-6);
  }
}

TEST(DominantDirections, DenseOracleOnRandomIndefinite) {
  RngStream rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t dim = 5 + static_cast<std::size_t>(rng.uniform() * 96);
    const SymMatrix m = testing::random_symmetric(dim, rng);
    const DenseEigen e = sym_eigen(m);
    const auto op = matrix_operator(m);
    const HessianDirections hd = dominant_hessian_directions(op, dim, {}, rng.substream(trial));
    ASSERT_GT(e.values(0), 0.0);
    ASSERT_LT(e.values(e.values.size() - 1), 0.0);
    EXPECT_TRUE(hd.opposite_sign_found);
    EXPECT_LE(testing::rel_err(hd.max_pair.value, e.values(0)), 1e-8) << "dim " << dim;
    EXPECT_LE(testing::rel_err(hd.min_pair.value, e.values(e.values.size() - 1)), 1e-8);
    expect_pair_valid(op, hd.max_pair, 1e-8);
    expect_pair_valid(op, hd.min_pair, 1e-8);
    EXPECT_LE(std::abs(dot(hd.max_pair.vector, hd.min_pair.vector)), 1e-6);
  }
}

TEST(DominantDirections, MlpMatchesDenseFdHessian) {
  RngStream rng(12);
  const auto net = testing::random_net({2, 4, 2}, 10, rng, 1.0);
  const MlpMseLoss loss(net.layers, net.data);
  const DenseEigen e = sym_eigen(SymMatrix::symmetrized(testing::fd_hessian(loss, net.theta)));
  LanczosOptions opts;
  opts.tol = 1e-6;
  const HessianDirections hd = dominant_hessian_directions(loss, net.theta, opts, RngStream(13));
  ASSERT_TRUE(hd.opposite_sign_found);
  EXPECT_LE(testing::rel_err(hd.max_pair.value, e.values(0)), 1e-4);
  EXPECT_LE(testing::rel_err(hd.min_pair.value, e.values(e.values.size() - 1)), 1e-4);
}

TEST(HessianIndex, Examples) {
  EXPECT_EQ(hessian_index(closed_form_hessian_diagonal(SymmetricSaddleLoss(500))), 500u);
  EXPECT_EQ(hessian_index(closed_form_hessian_diagonal(AsymmetricSaddleLoss(500, 800))), 200u);
  EXPECT_EQ(hessian_index(SymMatrix::identity(5)), 0u);
  DVector d(3);
  d << -1e-11, -1e-9, 1;
  EXPECT_EQ(hessian_index(SymMatrix::diagonal(d)), 1u);
  EXPECT_THROW(hessian_index(SymMatrix::identity(600)), OracleLimitError);
}

TEST(RayleighSequence, ConvergesToShiftedEigenvalue) {
  const auto op = diag_op({5, -3, 2});
  DVector z0(3);
  z0 << 0.3, 0.5, -0.7;
  const auto seq = rayleigh_quotient_sequence(op, 5.0, z0, 200);
  ASSERT_EQ(seq.size(), 200u);
  EXPECT_NEAR(seq.back(), -8.0, 1e-10);
  EXPECT_NEAR(seq.back() + 5.0, -3.0, 1e-10);
  // Monotone error decay once the transient has passed.
  for (std::size_t k = 5; k + 1 < seq.size(); ++k) {
    const double e0 = std::abs(seq[k] + 8.0), e1 = std::abs(seq[k + 1] + 8.0);
    if (e0 > 1e-13) EXPECT_LE(e1, e0 * (1 + 1e-12)) << k;
  }
}

TEST(RayleighSequence, EigenvectorStartIsConstant) {
  const auto op = diag_op({5, -3, 2});
  const auto seq = rayleigh_quotient_sequence(op, 5.0, DVector::Unit(3, 2), 10);
  for (double x : seq) EXPECT_DOUBLE_EQ(x, -3.0);
}

TEST(RayleighSequence, BreakdownOnNullStart) {
  const auto op = diag_op({5, -3, 2});
  EXPECT_THROW(rayleigh_quotient_sequence(op, 5.0, DVector::Unit(3, 0), 5), BreakdownError);
  EXPECT_THROW(rayleigh_quotient_sequence(op, 5.0, DVector::Zero(3), 5), Error);
}

TEST(RayleighSequence, MatchesAnnihilationOnDenseMatrix) {
  RngStream rng(14);
  // Spectrum with a clear gap in the shifted operator so power iteration converges.
  DVector spec = DVector::LinSpaced(30, -2.0, 5.0);
  spec(0) = -4.0;
  const DMatrix Q = Eigen::HouseholderQR<DMatrix>(testing::random_symmetric(30, rng).matrix())
                        .householderQ();
  const SymMatrix m = SymMatrix::symmetrized(Q * spec.asDiagonal() * Q.transpose());
  const auto op = matrix_operator(m);
  const EigenPair l1 = lanczos_extreme(op, 30, {}, RngStream(15));
  const EigenPair opp = annihilate_opposite(op, l1.value, 30, {}, RngStream(16));
  const auto seq = rayleigh_quotient_sequence(op, l1.value, gaussian_vector(30, rng), 2000);
  EXPECT_LE(testing::rel_err(seq.back(), opp.value - l1.value), 1e-6);
}

TEST(HessianDirectionsJson, Fields) {
  DVector d(3);
  d << 5, -3, 2;
  const HessianDirections hd = dominant_hessian_directions(
      matrix_operator(SymMatrix::diagonal(d)), 3, {}, RngStream(1));
  const auto j = nlohmann::json::parse(hessian_directions_json(hd, RunInfo{"hessdirs", "{}", 1}, "x"));
  for (const char* key : {"max_eigenvalue", "min_eigenvalue", "residuals", "iterations", "seed"})
    EXPECT_TRUE(j.contains(key)) << key;
}

}  // namespace
}  // namespace curvlens
