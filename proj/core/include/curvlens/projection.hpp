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

// Two-direction projections L(theta* + alpha*eta + beta*delta): direction
// construction, surface evaluation on a grid, and the projected Hessian.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "curvlens/io.hpp"
#include "curvlens/losses.hpp"
#include "curvlens/numkit.hpp"
#include "curvlens/parallel.hpp"

namespace curvlens {

enum class DirectionKind { RandomGaussian, HessianDirections, UserSupplied };
enum class Normalization { None, Layerwise };

std::string to_string(DirectionKind kind);
std::string to_string(Normalization mode);

/// Consecutive parameter blocks (e.g. one per network layer) covering theta.
struct BlockLayout {
  std::vector<std::size_t> sizes;

  std::size_t total() const;
  static BlockLayout single(std::size_t n) { return BlockLayout{{n}}; }
};

struct DirectionPair {
  DVector eta;
  DVector delta;
  DirectionKind kind = DirectionKind::UserSupplied;
  Normalization normalization = Normalization::None;
};

/// Rescales each block of `direction` to the 2-norm of the matching block of
/// theta_star. A block whose direction part is zero is left at zero.
DVector layerwise_normalize(const DVector& direction, const DVector& theta_star,
                            const BlockLayout& layout);

/// Two independent standard-normal directions drawn in order (eta, then
/// delta) from `rng`, without normalization.
DirectionPair make_random_pair(std::size_t dim, RngStream& rng);

/// As above; with Normalization::Layerwise each direction is passed through
/// layerwise_normalize. Throws Error when layerwise is requested without a
/// layout.
DirectionPair make_random_pair(const DVector& theta_star, RngStream& rng,
                               Normalization normalization,
                               const std::optional<BlockLayout>& layout);

/// Wraps user vectors; checks their dimensions agree.
DirectionPair make_user_pair(DVector eta, DVector delta);

struct ProjectedHessian {
  double A = 0.0;
  double B = 0.0;
  double C = 0.0;
};

/// Eigenvalues of [[A, B], [B, C]], kappa_plus >= kappa_minus.
struct CurvaturePair {
  double kappa_plus = 0.0;
  double kappa_minus = 0.0;
};

/// A = eta.H.eta, B = eta.H.delta, C = delta.H.delta with H the Hessian at theta_star.
ProjectedHessian projected_hessian(const LossFunction& loss, const DVector& theta_star,
                                   const DirectionPair& pair);

/// 0.5 * (A + C +- sqrt(4B^2 + (A - C)^2)).
CurvaturePair principal_curvatures_2d(const ProjectedHessian& ph);

/// trace / n; throws InvalidDimension when n == 0.
double mean_curvature(double trace, std::size_t n);

struct GridSpec {
  double alpha_min = -1.0;
  double alpha_max = 1.0;
  double beta_min = -1.0;
  double beta_max = 1.0;
  std::size_t n_alpha = 51;
  std::size_t n_beta = 51;

  /// Uniform and inclusive of both endpoints; a single point sits at the midpoint.
  std::vector<double> alphas() const;
  std::vector<double> betas() const;
};

struct GridResult {
  GridSpec spec;
  /// Row-major: values[i * n_beta + j] = L(theta* + alpha_i eta + beta_j delta).
  /// Non-finite losses are stored as NaN.
  std::vector<double> values;
  std::size_t nonfinite_count = 0;

  DirectionKind kind = DirectionKind::UserSupplied;
  Normalization normalization = Normalization::None;
  std::string loss_name;
  std::string theta_digest;
  std::vector<std::uint64_t> seeds;
  /// (max, min) eigenvalues when the directions are Hessian directions.
  std::optional<std::pair<double, double>> eigenvalues;
  std::optional<ProjectedHessian> origin_hessian;

  double at(std::size_t i, std::size_t j) const { return values[i * spec.n_beta + j]; }
};

GridResult project_loss_grid(const LossFunction& loss, const DVector& theta_star,
                             const DirectionPair& pair, const GridSpec& grid,
                             const Exec& exec = {});

/// CSV `alpha,beta,loss` plus the JSON metadata file.
void export_grid(const GridResult& grid, const RunInfo& run, const std::string& csv_path,
                 const std::string& json_path);
std::string grid_metadata_json(const GridResult& grid, const RunInfo& run);

}  // namespace curvlens
