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

// Monte Carlo studies of random two-direction projections: ensemble averages
// of the projected Hessian under both averaging orders, curvature histograms,
// how often a projection hides (or shows) a saddle, and how close to
// orthogonal independent Gaussian directions are.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "curvlens/io.hpp"
#include "curvlens/losses.hpp"
#include "curvlens/numkit.hpp"
#include "curvlens/parallel.hpp"
#include "curvlens/projection.hpp"

namespace curvlens {

struct Summary {
  double mean = 0.0;
  double stddev = 0.0;     // sample standard deviation
  double std_error = 0.0;  // stddev / sqrt(count)
  std::size_t count = 0;
};

Summary summarize(const std::vector<double>& values);

/// Upper tail of the standard normal, 1 - Phi(x).
double normal_sf(double x);

struct CurvatureSample {
  double A = 0.0;
  double B = 0.0;
  double C = 0.0;
  double kappa_plus = 0.0;
  double kappa_minus = 0.0;
};

/// Running averages have one entry per sample count S = 1..samples.
/// ktilde_* are the curvatures of the averaged matrix [[<A>, <B>], [<B>, <C>]],
/// i.e. averaging before taking eigenvalues; mean_kplus/mean_kminus average after.
struct CurvatureEnsemble {
  std::vector<CurvatureSample> samples;
  std::vector<double> mean_A, mean_B, mean_C;
  std::vector<double> mean_kplus, mean_kminus;
  std::vector<double> ktilde_plus, ktilde_minus;

  std::size_t size() const noexcept { return samples.size(); }
  std::vector<double> column(double CurvatureSample::*field) const;
  Summary summary(double CurvatureSample::*field) const { return summarize(column(field)); }
};

/// Sample s draws an unnormalized Gaussian pair from rng.substream(s).
CurvatureEnsemble curvature_ensemble(const LossFunction& loss, const DVector& theta_star,
                                     std::size_t samples, const RngStream& rng,
                                     const Exec& exec = {});

struct SaddleMisidResult {
  std::size_t samples = 0;
  /// Direct count: fraction of samples with kappa_plus * kappa_minus > 0.
  double p_same_sign = 0.0;
  double std_error = 0.0;  // binomial
  /// Fraction with kappa_plus * kappa_minus < 0 (the saddle is visible).
  double p_opposite_sign = 0.0;
  /// P(k+>0)P(k->0) + P(k+<0)P(k-<0) with each marginal replaced by a
  /// normal fit (sample mean, sample stddev), treating k+ and k- as independent.
  double p_same_sign_gaussian = 0.0;
  /// Same product formula with the empirical marginal frequencies.
  double p_same_sign_marginal = 0.0;
};

SaddleMisidResult saddle_misid_probability(const CurvatureEnsemble& ensemble);
SaddleMisidResult saddle_misid_probability(const LossFunction& loss, const DVector& theta_star,
                                           std::size_t samples, const RngStream& rng,
                                           const Exec& exec = {});

struct Histogram {
  std::vector<double> edges;  // bins + 1 entries
  std::vector<std::size_t> counts;
  std::size_t underflow = 0;
  std::size_t overflow = 0;
};

inline constexpr std::size_t kDefaultHistogramBins = 60;

/// Uniform bins over mean +- 4 stddev (mean +- 0.5 when stddev is zero).
Histogram make_histogram(const std::vector<double>& values, std::size_t bins);

struct CurvatureHistograms {
  Histogram kappa_plus;
  Histogram kappa_minus;
};

CurvatureHistograms curvature_histograms(const CurvatureEnsemble& ensemble,
                                         std::size_t bins = kDefaultHistogramBins);

struct TailReport {
  std::size_t n = 0;
  std::size_t samples = 0;
  std::vector<double> epsilons;
  std::vector<double> empirical_freq;  // fraction with |dot(eta, delta) / n| >= eps
  std::vector<double> std_error;       // binomial
  std::vector<double> paper_bound;     // sqrt(2) exp(-2 n eps^2), reported only
  std::vector<double> gaussian_ref;    // 2 (1 - Phi(eps sqrt(n)))
  double sample_variance = 0.0;        // of dot(eta, delta) / n
  /// Largest |sum eta*delta - 1/4 sum((eta+delta)^2 - (eta-delta)^2)|, relative
  /// to 1/2 sum(eta^2 + delta^2), over all pairs.
  double max_identity_error = 0.0;
  std::size_t identity_failures = 0;  // pairs above 1e-10
};

inline constexpr double kIdentityTol = 1e-10;

/// Throws InvalidDimension when samples < 100 or n == 0.
TailReport orthogonality_tail(std::size_t n, std::size_t samples,
                              const std::vector<double>& epsilons, const RngStream& rng,
                              const Exec& exec = {});

/// Relative error of the chi-squared decomposition of dot(eta, delta).
double dot_identity_error(const DVector& eta, const DVector& delta);

// CSV writers.
std::string ensemble_csv(const CurvatureEnsemble& ensemble);
std::string histogram_csv(const Histogram& h);
std::string tail_csv(const TailReport& report);
std::string ensemble_json(const CurvatureEnsemble& ensemble, const SaddleMisidResult& misid,
                          const CurvatureHistograms& hists, const RunInfo& run,
                          const std::string& loss_name);
std::string tail_json(const TailReport& report, const RunInfo& run);

/// One-command reproduction of the ensemble, histogram, probability, trace
/// and tail studies on the analytic saddles. `outputs` maps an artifact key
/// to a file name (relative to output_dir); only the listed artifacts are
/// written. Keys:
///   ensemble_symmetric, ensemble_asymmetric,
///   hist_symmetric_kplus, hist_symmetric_kminus,
///   hist_asymmetric_kplus, hist_asymmetric_kminus,
///   trace_symmetric, trace_asymmetric, probabilities, tail, metadata
struct BundleConfig {
  std::uint64_t seed = 20240229;
  std::size_t n = 500;
  std::size_t ntilde = 800;
  std::size_t ensemble_samples = 10000;
  std::size_t histogram_samples = 20000;
  std::size_t histogram_bins = kDefaultHistogramBins;
  std::size_t trace_samples = 1000;
  double half_width = 0.05;
  std::size_t n_points = 21;
  /// Parameters of the "rare correct saddle" study.
  std::size_t visible_n = 900;
  std::size_t visible_ntilde = 1000;
  std::size_t visible_samples = 10000;
  std::size_t tail_dim = 100;
  std::size_t tail_samples = 100000;
  std::vector<double> tail_epsilons = {0.05, 0.1, 0.2, 0.3};
  std::map<std::string, std::string> outputs;

  static BundleConfig defaults();
  /// Missing keys keep their default; unknown keys are rejected.
  static BundleConfig from_json(const std::string& text);
  std::string to_json() const;
};

/// Returns the written paths in the order written. Throws IoError naming the path.
std::vector<std::string> study_bundle(const BundleConfig& config,
                                             const std::string& output_dir,
                                             const Exec& exec = {});

}  // namespace curvlens
