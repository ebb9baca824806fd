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

#include "curvlens/numkit.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "curvlens/errors.hpp"

namespace curvlens {

void require_dim(std::size_t n, const char* what) {
  if (n == 0) {
    throw InvalidDimension(std::string(what) + ": dimension must be >= 1");
  }
}

void require_same_dim(Eigen::Index a, Eigen::Index b, const char* what) {
  if (a != b) {
    throw DimensionMismatch(std::string(what) + ": dimension mismatch (" +
                            std::to_string(a) + " vs " + std::to_string(b) + ")");
  }
}

bool all_finite(const DVector& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

double dot(const DVector& u, const DVector& v) {
  require_same_dim(u.size(), v.size(), "dot");
  double s = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) s += u[i] * v[i];
  return s;
}

double norm2(const DVector& v) { return std::sqrt(dot(v, v)); }

double norm_inf(const DVector& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// ---------------------------------------------------------------------------
// Philox4x32-10

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi,
                    std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                           std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kPhiloxM0, ctr[0], hi0, lo0);
    mulhilo(kPhiloxM1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kPhiloxW0;
    key[1] += kPhiloxW1;
  }
  return ctr;
}

}  // namespace

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id) {}

RngStream RngStream::substream(std::uint64_t index) const {
  return RngStream(seed_, mix64(stream_id_ ^ mix64(index + 0x632BE59BD9B4E019ull)));
}

void RngStream::refill() {
  const std::array<std::uint32_t, 4> ctr = {
      static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
      static_cast<std::uint32_t>(stream_id_),
      static_cast<std::uint32_t>(stream_id_ >> 32)};
  const std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(seed_),
                                            static_cast<std::uint32_t>(seed_ >> 32)};
  const auto out = philox4x32_10(ctr, key);
  ++block_;
  buffer_[0] = (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
  buffer_[1] = (static_cast<std::uint64_t>(out[3]) << 32) | out[2];
  buffered_ = 2;
}

std::uint64_t RngStream::next_u64() {
  if (buffered_ == 0) refill();
  return buffer_[2 - buffered_--];
}

double RngStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_normal_;
  }
  // u1 in (0, 1] keeps the log finite.
  const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double phi = 2.0 * std::numbers::pi * u2;
  spare_normal_ = r * std::sin(phi);
  has_spare_ = true;
  return r * std::cos(phi);
}

DVector gaussian_vector(std::size_t n, RngStream& rng) {
  require_dim(n, "gaussian_vector");
  DVector v(static_cast<Eigen::Index>(n));
  for (auto& x : v) x = rng.normal();
  return v;
}

DVector rademacher_vector(std::size_t n, RngStream& rng) {
  require_dim(n, "rademacher_vector");
  DVector v(static_cast<Eigen::Index>(n));
  std::uint64_t bits = 0;
  int left = 0;
  for (auto& x : v) {
    if (left == 0) {
      bits = rng.next_u64();
      left = 64;
    }
    x = (bits & 1u) ? 1.0 : -1.0;
    bits >>= 1;
    --left;
  }
  return v;
}

// ---------------------------------------------------------------------------

QuadraticFit quadratic_fit(std::span<const double> alphas,
                           std::span<const double> values) {
  if (alphas.size() != values.size()) {
    throw FitError("quadratic_fit: abscissa/value count mismatch");
  }
  if (alphas.size() < 3) throw FitError("quadratic_fit: need at least 3 points");
  for (std::size_t k = 0; k < alphas.size(); ++k) {
    if (!std::isfinite(alphas[k]) || !std::isfinite(values[k])) {
      throw FitError("quadratic_fit: non-finite input at point " + std::to_string(k));
    }
  }

  std::vector<double> sorted(alphas.begin(), alphas.end());
  std::sort(sorted.begin(), sorted.end());
  if (std::unique(sorted.begin(), sorted.end()) - sorted.begin() < 3) {
    throw FitError("quadratic_fit: need at least 3 distinct abscissae");
  }

  // Rescale t = (a - center) / scale so the normal matrix stays O(1).
  const double center = 0.5 * (sorted.front() + sorted.back());
  const double scale = 0.5 * (sorted.back() - sorted.front());

  double g[3][4] = {};
  for (std::size_t k = 0; k < alphas.size(); ++k) {
    const double t = (alphas[k] - center) / scale;
    const double basis[3] = {1.0, t, t * t};
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) g[r][c] += basis[r] * basis[c];
      g[r][3] += basis[r] * values[k];
    }
  }

  double norm = 0.0;
  for (auto& row : g)
    for (int c = 0; c < 3; ++c) norm = std::max(norm, std::abs(row[c]));

  for (int col = 0; col < 3; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 3; ++r)
      if (std::abs(g[r][col]) > std::abs(g[pivot][col])) pivot = r;
    if (std::abs(g[pivot][col]) <= 1e-13 * norm) {
      throw FitError("quadratic_fit: rank-deficient normal equations");
    }
    if (pivot != col)
      for (int c = 0; c < 4; ++c) std::swap(g[col][c], g[pivot][c]);
    for (int r = col + 1; r < 3; ++r) {
      const double f = g[r][col] / g[col][col];
      for (int c = col; c < 4; ++c) g[r][c] -= f * g[col][c];
    }
  }
  double b[3];
  for (int r = 2; r >= 0; --r) {
    double s = g[r][3];
    for (int c = r + 1; c < 3; ++c) s -= g[r][c] * b[c];
    b[r] = s / g[r][r];
  }

  // Undo the change of variables: p(a) = b0 + b1 t + b2 t^2, t = (a - m)/s.
  const double b1 = b[1] / scale;
  const double b2 = b[2] / (scale * scale);
  QuadraticFit fit;
  fit.c2 = b2;
  fit.c1 = b1 - 2.0 * b2 * center;
  fit.c0 = b[0] - b1 * center + b2 * center * center;
  return fit;
}

// ---------------------------------------------------------------------------

SymMatrix::SymMatrix(DMatrix m) : m_(std::move(m)) {
  if (m_.rows() != m_.cols()) {
    throw DimensionMismatch("SymMatrix: matrix is not square");
  }
  require_dim(static_cast<std::size_t>(m_.rows()), "SymMatrix");
  for (Eigen::Index i = 0; i < m_.rows(); ++i)
    for (Eigen::Index j = i + 1; j < m_.cols(); ++j)
      if (m_(i, j) != m_(j, i)) {
        throw Error("SymMatrix: entries (" + std::to_string(i) + "," +
                    std::to_string(j) + ") are not symmetric");
      }
}

SymMatrix SymMatrix::symmetrized(const DMatrix& m) {
  if (m.rows() != m.cols()) {
    throw DimensionMismatch("SymMatrix: matrix is not square");
  }
  DMatrix s = m;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = i + 1; j < m.cols(); ++j) {
      const double avg = 0.5 * (m(i, j) + m(j, i));
      s(i, j) = avg;
      s(j, i) = avg;
    }
  return SymMatrix(std::move(s));
}

SymMatrix SymMatrix::diagonal(const DVector& d) {
  return SymMatrix(DMatrix(d.asDiagonal()));
}

SymMatrix SymMatrix::identity(std::size_t n) {
  require_dim(n, "SymMatrix::identity");
  const auto k = static_cast<Eigen::Index>(n);
  return SymMatrix(DMatrix::Identity(k, k));
}

DVector SymMatrix::apply(const DVector& v) const {
  require_same_dim(m_.cols(), v.size(), "SymMatrix::apply");
  return m_ * v;
}

DenseEigen sym_eigen(const SymMatrix& m, std::size_t limit) {
  if (m.dim() > limit) {
    throw OracleLimitError("sym_eigen: dimension " + std::to_string(m.dim()) +
                           " exceeds oracle limit " + std::to_string(limit));
  }
  Eigen::SelfAdjointEigenSolver<DMatrix> solver(m.matrix());
  if (solver.info() != Eigen::Success) {
    throw Error("sym_eigen: dense eigensolver failed");
  }
  // Eigen sorts ascending; flip to descending.
  DenseEigen out;
  out.values = solver.eigenvalues().reverse();
  out.vectors = solver.eigenvectors().rowwise().reverse();
  return out;
}

}  // namespace curvlens
