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

// Matrix-free estimators of tr(H) at a point:
//  - Hutchinson: mean of z^T H z over random probes z;
//  - slice fit: mean of 2*c2, with c2 the quadratic coefficient of a
//    least-squares fit to L(theta* + alpha*eta) on a small symmetric interval.
//
// The slice-fit estimator uses the raw Gaussian eta with no normalization:
// E[eta^T H eta] = tr(H) only holds for unit-variance components. This differs
// from the projection plotting path, which may rescale directions.

#include <cstdint>
#include <string>
#include <vector>

#include "curvlens/io.hpp"
#include "curvlens/losses.hpp"
#include "curvlens/numkit.hpp"
#include "curvlens/parallel.hpp"

namespace curvlens {

enum class TraceMethod { HutchinsonGaussian, HutchinsonRademacher, SliceFit };
enum class ProbeDistribution { Gaussian, Rademacher };

std::string to_string(TraceMethod method);

struct TraceEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
  TraceMethod method = TraceMethod::HutchinsonGaussian;
  std::vector<double> per_sample;

  /// Mean and sample standard deviation / sqrt(S) of `values`.
  static TraceEstimate from_samples(std::vector<double> values, TraceMethod method);
};

inline constexpr double kDefaultHalfWidth = 0.05;
inline constexpr std::size_t kDefaultSlicePoints = 21;

/// Sample s draws its probe from rng.substream(s).
TraceEstimate hutchinson_trace(const LossFunction& loss, const DVector& theta_star,
                               std::size_t samples, const RngStream& rng,
                               ProbeDistribution dist, const Exec& exec = {});

/// Per-sample curvature 2*c2 of the fitted slice. Sample s draws its Gaussian
/// direction from rng.substream(s), the same probe hutchinson_trace uses for
/// a Gaussian run with the same rng. A failed fit throws FitError naming the
/// sample index.
TraceEstimate slice_fit_trace(const LossFunction& loss, const DVector& theta_star,
                              std::size_t samples, const RngStream& rng,
                              double half_width = kDefaultHalfWidth,
                              std::size_t n_points = kDefaultSlicePoints,
                              const Exec& exec = {});

/// Curvature 2*c2 of one slice along eta.
double slice_curvature(const LossFunction& loss, const DVector& theta_star,
                       const DVector& eta, double half_width, std::size_t n_points);

/// Both estimators fed with the same Gaussian probe per sample.
struct PairedConvergence {
  TraceEstimate hutchinson;
  TraceEstimate slice_fit;
  std::vector<double> hutchinson_running_mean;
  std::vector<double> slicefit_running_mean;
};

PairedConvergence paired_convergence(const LossFunction& loss, const DVector& theta_star,
                                     std::size_t samples, std::uint64_t seed,
                                     double half_width = kDefaultHalfWidth,
                                     std::size_t n_points = kDefaultSlicePoints,
                                     const Exec& exec = {});

/// running[k] = mean(values[0..k]).
std::vector<double> running_mean(const std::vector<double>& values);

/// CSV `sample,hutchinson_running_mean,slicefit_running_mean`, samples 1-based.
std::string convergence_csv(const PairedConvergence& pc);
std::string trace_json(const std::vector<const TraceEstimate*>& estimates, const RunInfo& run,
                       const std::string& loss_name);

}  // namespace curvlens
