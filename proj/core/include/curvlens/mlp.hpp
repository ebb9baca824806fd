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

// Small tanh feedforward network under a mean-squared loss.
//
// Parameter layout (checkpoints depend on it): layers in order; within a
// layer the weight matrix (rows = outputs, cols = inputs) in row-major order,
// followed by that layer's biases.

#include <cstddef>
#include <string>
#include <vector>

#include "curvlens/losses.hpp"
#include "curvlens/numkit.hpp"

namespace curvlens {

/// T samples; row t of `inputs` / `targets` is x(t) / y(t).
struct Dataset {
  DMatrix inputs;
  DMatrix targets;

  std::size_t size() const noexcept { return static_cast<std::size_t>(inputs.rows()); }
};

/// Header line, then one row per sample: feature columns then target columns.
Dataset load_dataset_csv(const std::string& path, std::size_t n_inputs,
                         std::size_t n_outputs);
void save_dataset_csv(const std::string& path, const Dataset& data);

std::size_t mlp_parameter_count(const std::vector<std::size_t>& layer_sizes);

class MlpMseLoss final : public LossFunction {
 public:
  /// layer_sizes = {inputs, hidden..., outputs}; at least two entries.
  MlpMseLoss(std::vector<std::size_t> layer_sizes, Dataset data);

  std::size_t dim() const override { return n_params_; }
  std::string name() const override;

  const std::vector<std::size_t>& layer_sizes() const noexcept { return sizes_; }
  const Dataset& data() const noexcept { return data_; }
  /// Parameter count of each layer (weights + biases), in layout order.
  std::vector<std::size_t> layer_layout() const;

  DVector forward(const DVector& theta, const DVector& x) const;
  /// C x N Jacobian of the network output for sample t.
  DMatrix output_jacobian(const DVector& theta, std::size_t t) const;

 protected:
  double value_impl(const DVector& theta) const override;
  DVector grad_impl(const DVector& theta) const override;
  /// Central difference of grad along v.
  DVector hvp_impl(const DVector& theta, const DVector& v) const override;

 private:
  struct LayerView {
    std::size_t in, out, w_offset, b_offset;
  };
  void forward_pass(const DVector& theta, const DVector& x,
                    std::vector<DVector>& activations) const;
  void backward_pass(const DVector& theta, const std::vector<DVector>& activations,
                     DVector delta, DVector& grad) const;

  std::vector<std::size_t> sizes_;
  std::vector<LayerView> layers_;
  std::size_t n_params_ = 0;
  Dataset data_;
};

/// Step used by the finite-difference HVP.
double fd_hvp_step(const DVector& theta, const DVector& v);

/// (1/T) sum_t J_t^T J_t with J_t the output Jacobian. Throws
/// OracleLimitError when dim() > limit.
SymMatrix empirical_fim(const MlpMseLoss& loss, const DVector& theta,
                        std::size_t limit = kDefaultOracleLimit);

struct MlpCheckpoint {
  std::vector<std::size_t> layer_sizes;
  DVector weights;
  std::string activation = "tanh";
};

/// {"layer_sizes": [...], "weights": [...], "activation": "tanh"}
MlpCheckpoint load_checkpoint(const std::string& path);
void save_checkpoint(const std::string& path, const MlpCheckpoint& ckpt);

}  // namespace curvlens
