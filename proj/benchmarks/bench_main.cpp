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

#include <benchmark/benchmark.h>

#include "curvlens/experiments.hpp"
#include "curvlens/losses.hpp"
#include "curvlens/mlp.hpp"
#include "curvlens/spectral.hpp"
#include "curvlens/trace.hpp"

namespace {

using namespace curvlens;

void BM_GaussianVector(benchmark::State& state) {
  RngStream rng(1);
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(gaussian_vector(n, rng));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_GaussianVector)->Arg(1000)->Arg(100000);

void BM_SaddleHvp(benchmark::State& state) {
  const AsymmetricSaddleLoss loss(static_cast<std::size_t>(state.range(0)),
                                  static_cast<std::size_t>(state.range(0) * 8 / 5));
  RngStream rng(2);
  const DVector theta = loss.critical_point();
  const DVector v = gaussian_vector(loss.dim(), rng);
  for (auto _ : state) benchmark::DoNotOptimize(loss.hvp(theta, v));
}
BENCHMARK(BM_SaddleHvp)->Arg(500)->Arg(5000);

void BM_MlpHvp(benchmark::State& state) {
  RngStream rng(3);
  const std::vector<std::size_t> layers{8, 32, 32, 4};
  Dataset data;
  data.inputs = DMatrix::Random(128, 8);
  data.targets = DMatrix::Random(128, 4);
  const MlpMseLoss loss(layers, data);
  const DVector theta = 0.3 * gaussian_vector(loss.dim(), rng);
  const DVector v = gaussian_vector(loss.dim(), rng);
  for (auto _ : state) benchmark::DoNotOptimize(loss.hvp(theta, v));
}
BENCHMARK(BM_MlpHvp);

void BM_DominantDirections(benchmark::State& state) {
  const AsymmetricSaddleLoss loss(static_cast<std::size_t>(state.range(0)),
                                  static_cast<std::size_t>(state.range(0) * 10 / 9));
  const DVector theta = loss.critical_point();
  for (auto _ : state)
    benchmark::DoNotOptimize(dominant_hessian_directions(loss, theta, {}, RngStream(4)));
}
BENCHMARK(BM_DominantDirections)->Arg(900)->Unit(benchmark::kMillisecond);

void BM_CurvatureEnsemble(benchmark::State& state) {
  const SymmetricSaddleLoss loss(500);
  const DVector theta = loss.critical_point();
  for (auto _ : state)
    benchmark::DoNotOptimize(curvature_ensemble(loss, theta, 1000, RngStream(5), Exec{1}));
  state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_CurvatureEnsemble)->Unit(benchmark::kMillisecond);

void BM_SliceFitTrace(benchmark::State& state) {
  const AsymmetricSaddleLoss loss(500, 800);
  const DVector theta = loss.critical_point();
  for (auto _ : state)
    benchmark::DoNotOptimize(slice_fit_trace(loss, theta, 100, RngStream(6), 0.05, 21, Exec{1}));
}
BENCHMARK(BM_SliceFitTrace)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
