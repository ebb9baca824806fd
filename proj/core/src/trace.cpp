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

#include "curvlens/trace.hpp"

#include <cmath>

#include <json.hpp>

#include "curvlens/errors.hpp"

namespace curvlens {

std::string to_string(TraceMethod method) {
  switch (method) {
    case TraceMethod::HutchinsonGaussian: return "hutchinson-gaussian";
    case TraceMethod::HutchinsonRademacher: return "hutchinson-rademacher";
    case TraceMethod::SliceFit: return "slice-fit";
  }
  return "unknown";
}

TraceEstimate TraceEstimate::from_samples(std::vector<double> values, TraceMethod method) {
  TraceEstimate t;
  t.method = method;
  t.samples = values.size();
  if (values.empty()) return t;
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double var = values.size() > 1 ? ss / static_cast<double>(values.size() - 1) : 0.0;
  t.estimate = mean;
  t.std_error = std::sqrt(var / static_cast<double>(values.size()));
  t.per_sample = std::move(values);
  return t;
}

std::vector<double> running_mean(const std::vector<double>& values) {
  std::vector<double> out(values.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    sum += values[k];
    out[k] = sum / static_cast<double>(k + 1);
  }
  return out;
}

namespace {

void check_inputs(const LossFunction& loss, const DVector& theta_star, std::size_t samples) {
  require_same_dim(static_cast<Eigen::Index>(loss.dim()), theta_star.size(), "trace");
  if (samples == 0) throw InvalidDimension("trace: samples must be >= 1");
}

DVector probe(std::size_t dim, const RngStream& rng, std::size_t s, ProbeDistribution dist) {
  RngStream sub = rng.substream(s);
  return dist == ProbeDistribution::Gaussian ? gaussian_vector(dim, sub)
                                             : rademacher_vector(dim, sub);
}

}  // namespace

TraceEstimate hutchinson_trace(const LossFunction& loss, const DVector& theta_star,
                               std::size_t samples, const RngStream& rng,
                               ProbeDistribution dist, const Exec& exec) {
  check_inputs(loss, theta_star, samples);
  std::vector<double> values(samples);
  parallel_for(samples, exec, [&](std::size_t s) {
    const DVector z = probe(loss.dim(), rng, s, dist);
    values[s] = dot(z, loss.hvp(theta_star, z));
  });
  return TraceEstimate::from_samples(std::move(values),
                                     dist == ProbeDistribution::Gaussian
                                         ? TraceMethod::HutchinsonGaussian
                                         : TraceMethod::HutchinsonRademacher);
}

double slice_curvature(const LossFunction& loss, const DVector& theta_star,
                       const DVector& eta, double half_width, std::size_t n_points) {
  if (!(half_width > 0.0)) throw FitError("slice fit: half_width must be > 0");
  if (n_points < 3) throw FitError("slice fit: need at least 3 points");
  std::vector<double> alphas(n_points), values(n_points);
  const double step = 2.0 * half_width / static_cast<double>(n_points - 1);
  for (std::size_t k = 0; k < n_points; ++k) {
    // Symmetric by construction: alpha_k = -alpha_{n-1-k} exactly.
    const double a = (static_cast<double>(k) - 0.5 * static_cast<double>(n_points - 1)) * step;
    alphas[k] = a;
    values[k] = loss.value(theta_star + a * eta);
  }
  return 2.0 * quadratic_fit(alphas, values).c2;
}

TraceEstimate slice_fit_trace(const LossFunction& loss, const DVector& theta_star,
                              std::size_t samples, const RngStream& rng, double half_width,
                              std::size_t n_points, const Exec& exec) {
  check_inputs(loss, theta_star, samples);
  if (!(half_width > 0.0)) throw FitError("slice_fit_trace: half_width must be > 0");
  if (n_points < 3) throw FitError("slice_fit_trace: need at least 3 points");
  std::vector<double> values(samples);
  parallel_for(samples, exec, [&](std::size_t s) {
    const DVector eta = probe(loss.dim(), rng, s, ProbeDistribution::Gaussian);
    try {
      values[s] = slice_curvature(loss, theta_star, eta, half_width, n_points);
    } catch (const FitError& e) {
      throw FitError("slice_fit_trace: sample " + std::to_string(s) + ": " + e.what());
    }
  });
  return TraceEstimate::from_samples(std::move(values), TraceMethod::SliceFit);
}

PairedConvergence paired_convergence(const LossFunction& loss, const DVector& theta_star,
                                     std::size_t samples, std::uint64_t seed,
                                     double half_width, std::size_t n_points,
                                     const Exec& exec) {
  check_inputs(loss, theta_star, samples);
  const RngStream rng(seed);
  std::vector<double> hutch(samples), slice(samples);
  parallel_for(samples, exec, [&](std::size_t s) {
    const DVector eta = probe(loss.dim(), rng, s, ProbeDistribution::Gaussian);
    hutch[s] = dot(eta, loss.hvp(theta_star, eta));
    try {
      slice[s] = slice_curvature(loss, theta_star, eta, half_width, n_points);
    } catch (const FitError& e) {
      throw FitError("paired_convergence: sample " + std::to_string(s) + ": " + e.what());
    }
  });
  PairedConvergence pc;
  pc.hutchinson_running_mean = running_mean(hutch);
  pc.slicefit_running_mean = running_mean(slice);
  pc.hutchinson = TraceEstimate::from_samples(std::move(hutch), TraceMethod::HutchinsonGaussian);
  pc.slice_fit = TraceEstimate::from_samples(std::move(slice), TraceMethod::SliceFit);
  return pc;
}

std::string convergence_csv(const PairedConvergence& pc) {
  CsvWriter csv({"sample", "hutchinson_running_mean", "slicefit_running_mean"});
  for (std::size_t k = 0; k < pc.hutchinson_running_mean.size(); ++k) {
    csv.row({static_cast<double>(k + 1), pc.hutchinson_running_mean[k],
             pc.slicefit_running_mean[k]});
  }
  return csv.str();
}

std::string trace_json(const std::vector<const TraceEstimate*>& estimates, const RunInfo& run,
                       const std::string& loss_name) {
  nlohmann::ordered_json j;
  j["command"] = run.command;
  j["version"] = version_string();
  j["config"] = nlohmann::ordered_json::parse(run.config_json);
  j["seed"] = run.seed;
  j["loss"] = loss_name;
  auto& arr = j["estimates"];
  arr = nlohmann::ordered_json::array();
  for (const auto* e : estimates) {
    arr.push_back({{"method", to_string(e->method)},
                   {"estimate", e->estimate},
                   {"stderr", e->std_error},
                   {"samples", e->samples}});
  }
  return j.dump(2) + "\n";
}

}  // namespace curvlens
