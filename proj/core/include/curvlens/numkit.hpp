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

// Dense vector/matrix primitives, counter-based random streams, degree-2
// least squares, and the dense symmetric eigensolver used as an oracle.

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>

namespace curvlens {

using DVector = Eigen::VectorXd;
using DMatrix = Eigen::MatrixXd;

inline constexpr std::size_t kDefaultOracleLimit = 500;

/// Throws InvalidDimension when n == 0.
void require_dim(std::size_t n, const char* what);
/// Throws DimensionMismatch when the sizes differ.
void require_same_dim(Eigen::Index a, Eigen::Index b, const char* what);
bool all_finite(const DVector& v);

/// Sum of u_i * v_i accumulated strictly left to right.
double dot(const DVector& u, const DVector& v);
double norm2(const DVector& v);
double norm_inf(const DVector& v);

/// Counter-based generator (Philox4x32-10). The key is the seed and the
/// upper half of the counter is the stream id, so (seed, stream_id) pins the
/// whole sequence and substreams never share counter blocks with each other.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  /// Independent stream for task `index` (e.g. the Monte Carlo sample index).
  /// Depends only on (seed, stream_id, index), never on this stream's state.
  RngStream substream(std::uint64_t index) const;

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Standard normal via Box-Muller; the second variate of each pair is
  /// cached and returned by the next call.
  double normal();

 private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t block_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  int buffered_ = 0;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

/// splitmix64 finalizer; used for deriving stream ids.
std::uint64_t mix64(std::uint64_t x) noexcept;

DVector gaussian_vector(std::size_t n, RngStream& rng);
DVector rademacher_vector(std::size_t n, RngStream& rng);

struct QuadraticFit {
  double c0 = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
};

/// Least-squares fit of c0 + c1*a + c2*a^2 through the 3x3 normal equations
/// (abscissae rescaled to [-1, 1] first; Gaussian elimination with partial
/// pivoting). Throws FitError on < 3 distinct abscissae or a singular system.
QuadraticFit quadratic_fit(std::span<const double> alphas,
                           std::span<const double> values);

/// Dense symmetric matrix. Construction rejects anything not exactly
/// symmetric; use symmetrized() for matrices assembled with rounding noise.
class SymMatrix {
 public:
  explicit SymMatrix(DMatrix m);
  static SymMatrix symmetrized(const DMatrix& m);
  static SymMatrix diagonal(const DVector& d);
  static SymMatrix identity(std::size_t n);

  std::size_t dim() const noexcept { return static_cast<std::size_t>(m_.rows()); }
  double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }
  const DMatrix& matrix() const noexcept { return m_; }
  DVector apply(const DVector& v) const;
  double frobenius_norm() const { return m_.norm(); }

 private:
  DMatrix m_;
};

/// Eigenvalues in descending order; column k of `vectors` pairs with values[k].
struct DenseEigen {
  DVector values;
  DMatrix vectors;
};

/// Throws OracleLimitError when m.dim() > limit.
DenseEigen sym_eigen(const SymMatrix& m, std::size_t limit = kDefaultOracleLimit);

}  // namespace curvlens
