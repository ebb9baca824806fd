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

#include "curvlens/projection.hpp"

#include <cmath>
#include <numeric>

#include <json.hpp>

#include "curvlens/errors.hpp"

namespace curvlens {

std::string to_string(DirectionKind kind) {
  switch (kind) {
    case DirectionKind::RandomGaussian: return "random-gaussian";
    case DirectionKind::HessianDirections: return "hessian-directions";
    case DirectionKind::UserSupplied: return "user-supplied";
  }
  return "unknown";
}

std::string to_string(Normalization mode) {
  return mode == Normalization::Layerwise ? "layerwise" : "none";
}

std::size_t BlockLayout::total() const {
  return std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
}

DVector layerwise_normalize(const DVector& direction, const DVector& theta_star,
                            const BlockLayout& layout) {
  require_same_dim(direction.size(), theta_star.size(), "layerwise_normalize");
  require_same_dim(static_cast<Eigen::Index>(layout.total()), direction.size(),
                   "layerwise_normalize layout");
  DVector out = direction;
  Eigen::Index offset = 0;
  for (std::size_t size : layout.sizes) {
    const auto n = static_cast<Eigen::Index>(size);
    auto block = out.segment(offset, n);
    const double dn = block.norm();
    if (dn > 0.0) block *= theta_star.segment(offset, n).norm() / dn;
    offset += n;
  }
  return out;
}

DirectionPair make_random_pair(std::size_t dim, RngStream& rng) {
  DirectionPair pair;
  pair.eta = gaussian_vector(dim, rng);
  pair.delta = gaussian_vector(dim, rng);
  pair.kind = DirectionKind::RandomGaussian;
  return pair;
}

DirectionPair make_random_pair(const DVector& theta_star, RngStream& rng,
                               Normalization normalization,
                               const std::optional<BlockLayout>& layout) {
  if (normalization == Normalization::Layerwise && !layout) {
    throw Error("make_random_pair: layerwise normalization requires a block layout");
  }
  DirectionPair pair = make_random_pair(static_cast<std::size_t>(theta_star.size()), rng);
  if (normalization == Normalization::Layerwise) {
    pair.eta = layerwise_normalize(pair.eta, theta_star, *layout);
    pair.delta = layerwise_normalize(pair.delta, theta_star, *layout);
    pair.normalization = Normalization::Layerwise;
  }
  return pair;
}

DirectionPair make_user_pair(DVector eta, DVector delta) {
  require_dim(static_cast<std::size_t>(eta.size()), "make_user_pair");
  require_same_dim(eta.size(), delta.size(), "make_user_pair");
  return DirectionPair{std::move(eta), std::move(delta), DirectionKind::UserSupplied,
                       Normalization::None};
}

ProjectedHessian projected_hessian(const LossFunction& loss, const DVector& theta_star,
                                   const DirectionPair& pair) {
  const DVector h_eta = loss.hvp(theta_star, pair.eta);
  const DVector h_delta = loss.hvp(theta_star, pair.delta);
  return ProjectedHessian{dot(pair.eta, h_eta), dot(pair.eta, h_delta),
                          dot(pair.delta, h_delta)};
}

CurvaturePair principal_curvatures_2d(const ProjectedHessian& ph) {
  const double mean = 0.5 * (ph.A + ph.C);
  const double radius = 0.5 * std::sqrt(4.0 * ph.B * ph.B + (ph.A - ph.C) * (ph.A - ph.C));
  return CurvaturePair{mean + radius, mean - radius};
}

double mean_curvature(double trace, std::size_t n) {
  require_dim(n, "mean_curvature");
  return trace / static_cast<double>(n);
}

namespace {
std::vector<double> linspace(double lo, double hi, std::size_t n) {
  require_dim(n, "GridSpec");
  if (n == 1) return {0.5 * (lo + hi)};
  std::vector<double> out(n);
  const double step = (hi - lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) out[i] = lo + step * static_cast<double>(i);
  out.back() = hi;
  return out;
}
}  // namespace

std::vector<double> GridSpec::alphas() const { return linspace(alpha_min, alpha_max, n_alpha); }
std::vector<double> GridSpec::betas() const { return linspace(beta_min, beta_max, n_beta); }

GridResult project_loss_grid(const LossFunction& loss, const DVector& theta_star,
                             const DirectionPair& pair, const GridSpec& grid,
                             const Exec& exec) {
  const auto n = static_cast<Eigen::Index>(loss.dim());
  require_same_dim(n, theta_star.size(), "project_loss_grid theta*");
  require_same_dim(n, pair.eta.size(), "project_loss_grid eta");
  require_same_dim(n, pair.delta.size(), "project_loss_grid delta");

  GridResult result;
  result.spec = grid;
  result.kind = pair.kind;
  result.normalization = pair.normalization;
  result.loss_name = loss.name();
  result.theta_digest = digest_hex(theta_star);

  const auto alphas = grid.alphas();
  const auto betas = grid.betas();
  result.values.assign(alphas.size() * betas.size(), 0.0);

  parallel_for(result.values.size(), exec, [&](std::size_t k) {
    const double a = alphas[k / betas.size()];
    const double b = betas[k % betas.size()];
    const DVector theta = theta_star + a * pair.eta + b * pair.delta;
    const double v = loss.value(theta);
    result.values[k] = std::isfinite(v) ? v : std::nan("");
  });
  for (double v : result.values)
    if (std::isnan(v)) ++result.nonfinite_count;
  return result;
}

std::string grid_metadata_json(const GridResult& grid, const RunInfo& run) {
  nlohmann::ordered_json j;
  j["command"] = run.command;
  j["version"] = version_string();
  j["config"] = nlohmann::ordered_json::parse(run.config_json);
  j["seed"] = run.seed;
  j["grid"] = {{"alpha_min", grid.spec.alpha_min}, {"alpha_max", grid.spec.alpha_max},
               {"beta_min", grid.spec.beta_min},   {"beta_max", grid.spec.beta_max},
               {"n_alpha", grid.spec.n_alpha},     {"n_beta", grid.spec.n_beta}};
  j["direction_kind"] = to_string(grid.kind);
  j["normalization"] = to_string(grid.normalization);
  j["seeds"] = grid.seeds;
  j["loss"] = grid.loss_name;
  j["theta_digest"] = grid.theta_digest;
  j["nonfinite_count"] = grid.nonfinite_count;
  if (grid.eigenvalues) {
    j["eigenvalues"] = {{"max", grid.eigenvalues->first}, {"min", grid.eigenvalues->second}};
  }
  if (grid.origin_hessian) {
    const auto& ph = *grid.origin_hessian;
    const auto k = principal_curvatures_2d(ph);
    j["projected_hessian"] = {{"A", ph.A}, {"B", ph.B}, {"C", ph.C}};
    j["principal_curvatures"] = {{"kappa_plus", k.kappa_plus}, {"kappa_minus", k.kappa_minus}};
  }
  return j.dump(2) + "\n";
}

void export_grid(const GridResult& grid, const RunInfo& run, const std::string& csv_path,
                 const std::string& json_path) {
  CsvWriter csv({"alpha", "beta", "loss"});
  const auto alphas = grid.spec.alphas();
  const auto betas = grid.spec.betas();
  for (std::size_t i = 0; i < alphas.size(); ++i)
    for (std::size_t j = 0; j < betas.size(); ++j) csv.row({alphas[i], betas[j], grid.at(i, j)});
  write_text_file(csv_path, csv.str());
  write_text_file(json_path, grid_metadata_json(grid, run));
}

}  // namespace curvlens
