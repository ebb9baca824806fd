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
#include "curvlens/experiments.hpp"
#include "curvlens/losses.hpp"
#include "curvlens/trace.hpp"
#include "support/oracles.hpp"

namespace curvlens {
namespace {

DVector diag_532() {
  DVector d(3);
  d << 5, -3, 2;
  return d;
}

TEST(Hutchinson, SaddlesAtThousandSamples) {
  const SymmetricSaddleLoss s(500);
  const TraceEstimate es =
      hutchinson_trace(s, critical_point(s), 1000, RngStream(1), ProbeDistribution::Gaussian);
  EXPECT_LE(std::abs(es.estimate), 3 * es.std_error);
  const AsymmetricSaddleLoss a(500, 800);
  const TraceEstimate ea =
      hutchinson_trace(a, critical_point(a), 1000, RngStream(1), ProbeDistribution::Gaussian);
  EXPECT_LE(std::abs(ea.estimate - 600), 3 * ea.std_error);
}

TEST(Hutchinson, RademacherOnDiagonal) {
  const DiagonalQuadraticLoss q(diag_532());
  const TraceEstimate e =
      hutchinson_trace(q, DVector::Zero(3), 1000, RngStream(2), ProbeDistribution::Rademacher);
  EXPECT_EQ(e.method, TraceMethod::HutchinsonRademacher);
  EXPECT_LE(std::abs(e.estimate - 4), 3 * e.std_error + 1e-12);
}

TEST(TraceEstimate, StatisticsMatchPerSample) {
  const AsymmetricSaddleLoss a(10, 15);
  const TraceEstimate e =
      hutchinson_trace(a, critical_point(a), 50, RngStream(3), ProbeDistribution::Gaussian);
  ASSERT_EQ(e.per_sample.size(), 50u);
  const Summary s = summarize(e.per_sample);
  EXPECT_DOUBLE_EQ(e.estimate, s.mean);
  EXPECT_DOUBLE_EQ(e.std_error, s.stddev / std::sqrt(50.0));
}

TEST(SliceFit, SaddlesAtThousandSamples) {
  const SymmetricSaddleLoss s(500);
  const TraceEstimate es = slice_fit_trace(s, critical_point(s), 1000, RngStream(4), 0.05, 21);
  EXPECT_LE(std::abs(es.estimate), 3 * es.std_error);
  const AsymmetricSaddleLoss a(500, 800);
  const TraceEstimate ea = slice_fit_trace(a, critical_point(a), 1000, RngStream(4), 0.05, 21);
  EXPECT_LE(std::abs(ea.estimate - 600), 3 * ea.std_error);
}

TEST(SliceFit, ExactOnQuadratic) {
  const DiagonalQuadraticLoss q(diag_532());
  RngStream rng(5);
  for (int k = 0; k < 50; ++k) {
    const DVector eta = gaussian_vector(3, rng);
    const double want = dot(eta, q.hvp(DVector::Zero(3), eta));
    EXPECT_LE(std::abs(slice_curvature(q, DVector::Zero(3), eta, 0.05, 21) - want),
              1e-8 * std::max(1.0, std::abs(want)));
  }
}

TEST(SliceFit, ArgumentChecks) {
  const DiagonalQuadraticLoss q(diag_532());
  EXPECT_THROW(slice_fit_trace(q, DVector::Zero(3), 5, RngStream(1), 0.05, 2), Error);
  EXPECT_THROW(slice_fit_trace(q, DVector::Zero(3), 5, RngStream(1), 0.0, 21), Error);
  EXPECT_THROW(slice_fit_trace(q, DVector::Zero(3), 0, RngStream(1), 0.05, 21), Error);
}

TEST(SliceFit, FitFailureNamesSample) {
  // Non-finite slice values make the fit fail; the message names the sample.
  const DiagonalQuadraticLoss q(DVector::Constant(2, 1e308));
  try {
    slice_fit_trace(q, DVector::Constant(2, 1e10), 3, RngStream(1), 0.05, 21);
    FAIL() << "expected an error";
  } catch (const FitError& e) {
    EXPECT_NE(std::string(e.what()).find("sample 0"), std::string::npos) << e.what();
  }
}

TEST(Paired, SameProbesFeedBothEstimators) {
  const DiagonalQuadraticLoss q(diag_532());
  const PairedConvergence pc = paired_convergence(q, DVector::Zero(3), 1, 9);
  ASSERT_EQ(pc.hutchinson_running_mean.size(), 1u);
  EXPECT_LE(testing::rel_err(pc.slicefit_running_mean[0], pc.hutchinson_running_mean[0]), 1e-6);
}

TEST(Paired, CubicSaddleSlicesAreExactlyQuadratic) {
  const SymmetricSaddleLoss s(500);
  const PairedConvergence pc = paired_convergence(s, critical_point(s), 1000, 7);
  ASSERT_EQ(pc.hutchinson_running_mean.size(), 1000u);
  ASSERT_EQ(pc.slicefit_running_mean.size(), 1000u);
  double sup = 0.0;
  for (double x : pc.hutchinson_running_mean) sup = std::max(sup, std::abs(x));
  for (std::size_t k = 0; k < 1000; ++k) {
    EXPECT_LE(std::abs(pc.hutchinson_running_mean[k] - pc.slicefit_running_mean[k]), 1e-6 * sup);
    const double h = pc.hutchinson.per_sample[k], f = pc.slice_fit.per_sample[k];
    EXPECT_LE(std::abs(h - f), 1e-8 * std::max(1.0, std::abs(h)));
  }
  EXPECT_LE(std::abs(pc.hutchinson.estimate), 3 * pc.hutchinson.std_error);
  EXPECT_LE(std::abs(pc.slice_fit.estimate), 3 * pc.slice_fit.std_error);
}

TEST(Paired, MatchesStandaloneEstimators) {
  const AsymmetricSaddleLoss a(30, 40);
  const DVector c = critical_point(a);
  const PairedConvergence pc = paired_convergence(a, c, 40, 11);
  const TraceEstimate h = hutchinson_trace(a, c, 40, RngStream(11), ProbeDistribution::Gaussian);
  EXPECT_EQ(h.per_sample, pc.hutchinson.per_sample);
  const TraceEstimate f = slice_fit_trace(a, c, 40, RngStream(11));
  EXPECT_EQ(f.per_sample, pc.slice_fit.per_sample);
}

TEST(Unbiasedness, FiftySeedsOnAsymmetricSaddle) {
  const AsymmetricSaddleLoss a(50, 80);
  const DVector c = critical_point(a);
  const double truth = closed_form_hessian_diagonal(a).sum();
  ASSERT_EQ(truth, 60.0);
  std::vector<double> hut, fit;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const PairedConvergence pc = paired_convergence(a, c, 200, seed * 7919);
    hut.push_back(pc.hutchinson.estimate);
    fit.push_back(pc.slice_fit.estimate);
  }
  const Summary sh = summarize(hut), sf = summarize(fit);
  EXPECT_LE(std::abs(sh.mean - truth), 4 * sh.std_error);
  EXPECT_LE(std::abs(sf.mean - truth), 4 * sf.std_error);
}

TEST(Trace, InvariantUnderThreadCount) {
  const AsymmetricSaddleLoss a(40, 60);
  const DVector c = critical_point(a);
  const PairedConvergence p1 = paired_convergence(a, c, 100, 5, 0.05, 21, Exec{1});
  const PairedConvergence p3 = paired_convergence(a, c, 100, 5, 0.05, 21, Exec{3});
  EXPECT_EQ(p1.hutchinson.per_sample, p3.hutchinson.per_sample);
  EXPECT_EQ(p1.slice_fit.per_sample, p3.slice_fit.per_sample);
  EXPECT_EQ(convergence_csv(p1), convergence_csv(p3));
}

TEST(Trace, CsvAndJson) {
  const DiagonalQuadraticLoss q(diag_532());
  const PairedConvergence pc = paired_convergence(q, DVector::Zero(3), 4, 2);
  const std::string csv = convergence_csv(pc);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "sample,hutchinson_running_mean,slicefit_running_mean");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
  const auto j = nlohmann::json::parse(
      trace_json({&pc.hutchinson, &pc.slice_fit}, RunInfo{"trace", "{}", 2}, q.name()));
  EXPECT_EQ(j["estimates"].size(), 2u);
  EXPECT_EQ(j["estimates"][1]["method"], "slice-fit");
}

TEST(RunningMean, Values) {
  EXPECT_EQ(running_mean({2, 4, 6}), (std::vector<double>{2, 3, 4}));
}

}  // namespace
}  // namespace curvlens
