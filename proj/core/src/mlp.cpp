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

#include "curvlens/mlp.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "curvlens/errors.hpp"
#include "curvlens/io.hpp"

namespace curvlens {

std::size_t mlp_parameter_count(const std::vector<std::size_t>& layer_sizes) {
  std::size_t n = 0;
  for (std::size_t l = 1; l < layer_sizes.size(); ++l) {
    n += layer_sizes[l] * layer_sizes[l - 1] + layer_sizes[l];
  }
  return n;
}

MlpMseLoss::MlpMseLoss(std::vector<std::size_t> layer_sizes, Dataset data)
    : sizes_(std::move(layer_sizes)), data_(std::move(data)) {
  if (sizes_.size() < 2) throw InvalidDimension("MlpMseLoss: need input and output layer sizes");
  for (auto s : sizes_) require_dim(s, "MlpMseLoss layer");
  if (data_.size() == 0) throw InvalidDimension("MlpMseLoss: empty dataset");
  require_same_dim(static_cast<Eigen::Index>(sizes_.front()), data_.inputs.cols(),
                   "MlpMseLoss inputs");
  require_same_dim(static_cast<Eigen::Index>(sizes_.back()), data_.targets.cols(),
                   "MlpMseLoss targets");
  require_same_dim(data_.inputs.rows(), data_.targets.rows(), "MlpMseLoss samples");

  std::size_t offset = 0;
  for (std::size_t l = 1; l < sizes_.size(); ++l) {
    LayerView v{sizes_[l - 1], sizes_[l], offset, offset + sizes_[l] * sizes_[l - 1]};
    offset = v.b_offset + v.out;
    layers_.push_back(v);
  }
  n_params_ = offset;
}

std::string MlpMseLoss::name() const {
  std::string s = "mlp:layers=";
  for (std::size_t i = 0; i < sizes_.size(); ++i) {
    if (i) s += '-';
    s += std::to_string(sizes_[i]);
  }
  return s + ",samples=" + std::to_string(data_.size());
}

std::vector<std::size_t> MlpMseLoss::layer_layout() const {
  std::vector<std::size_t> blocks;
  for (const auto& l : layers_) blocks.push_back(l.in * l.out + l.out);
  return blocks;
}

void MlpMseLoss::forward_pass(const DVector& theta, const DVector& x,
                              std::vector<DVector>& activations) const {
  activations.resize(layers_.size() + 1);
  activations[0] = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& L = layers_[l];
    const auto in = static_cast<Eigen::Index>(L.in);
    const auto out = static_cast<Eigen::Index>(L.out);
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
        w(theta.data() + L.w_offset, out, in);
    DVector z = w * activations[l] + theta.segment(static_cast<Eigen::Index>(L.b_offset), out);
    if (l + 1 < layers_.size()) z = z.array().tanh().matrix();
    activations[l + 1] = std::move(z);
  }
}

// Accumulates d(delta^T f)/d theta into grad, where delta is the adjoint of
// the network output.
void MlpMseLoss::backward_pass(const DVector& theta, const std::vector<DVector>& activations,
                               DVector delta, DVector& grad) const {
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const auto& L = layers_[l];
    const auto in = static_cast<Eigen::Index>(L.in);
    const auto out = static_cast<Eigen::Index>(L.out);
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> gw(
        grad.data() + L.w_offset, out, in);
    gw.noalias() += delta * activations[l].transpose();
    grad.segment(static_cast<Eigen::Index>(L.b_offset), out) += delta;
    if (l == 0) break;
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
        w(theta.data() + L.w_offset, out, in);
    DVector back = w.transpose() * delta;
    const DVector& a = activations[l];
    delta = back.cwiseProduct((1.0 - a.array().square()).matrix());
  }
}

DVector MlpMseLoss::forward(const DVector& theta, const DVector& x) const {
  require_same_dim(static_cast<Eigen::Index>(n_params_), theta.size(), "MlpMseLoss::forward");
  require_same_dim(static_cast<Eigen::Index>(sizes_.front()), x.size(), "MlpMseLoss::forward");
  std::vector<DVector> acts;
  forward_pass(theta, x, acts);
  return acts.back();
}

double MlpMseLoss::value_impl(const DVector& theta) const {
  std::vector<DVector> acts;
  double s = 0.0;
  for (Eigen::Index t = 0; t < data_.inputs.rows(); ++t) {
    forward_pass(theta, data_.inputs.row(t).transpose(), acts);
    s += (data_.targets.row(t).transpose() - acts.back()).squaredNorm();
  }
  return s / (2.0 * static_cast<double>(data_.size()));
}

DVector MlpMseLoss::grad_impl(const DVector& theta) const {
  DVector g = DVector::Zero(theta.size());
  std::vector<DVector> acts;
  const double inv_t = 1.0 / static_cast<double>(data_.size());
  for (Eigen::Index t = 0; t < data_.inputs.rows(); ++t) {
    forward_pass(theta, data_.inputs.row(t).transpose(), acts);
    DVector delta = (acts.back() - data_.targets.row(t).transpose()) * inv_t;
    backward_pass(theta, acts, std::move(delta), g);
  }
  return g;
}

double fd_hvp_step(const DVector& theta, const DVector& v) {
  const double eps = std::numeric_limits<double>::epsilon();
  return std::sqrt(eps) * (1.0 + norm_inf(theta)) / std::max(norm2(v), 1e-300);
}

DVector MlpMseLoss::hvp_impl(const DVector& theta, const DVector& v) const {
  if (norm_inf(v) == 0.0) return DVector::Zero(theta.size());
  const double h = fd_hvp_step(theta, v);
  const DVector gp = grad_impl(theta + h * v);
  const DVector gm = grad_impl(theta - h * v);
  return (gp - gm) / (2.0 * h);
}

DMatrix MlpMseLoss::output_jacobian(const DVector& theta, std::size_t t) const {
  require_same_dim(static_cast<Eigen::Index>(n_params_), theta.size(),
                   "MlpMseLoss::output_jacobian");
  if (t >= data_.size()) throw InvalidDimension("output_jacobian: sample index out of range");
  std::vector<DVector> acts;
  forward_pass(theta, data_.inputs.row(static_cast<Eigen::Index>(t)).transpose(), acts);
  const auto c = static_cast<Eigen::Index>(sizes_.back());
  DMatrix jac(c, theta.size());
  for (Eigen::Index k = 0; k < c; ++k) {
    DVector row = DVector::Zero(theta.size());
    backward_pass(theta, acts, DVector::Unit(c, k), row);
    jac.row(k) = row.transpose();
  }
  return jac;
}

SymMatrix empirical_fim(const MlpMseLoss& loss, const DVector& theta, std::size_t limit) {
  if (loss.dim() > limit) {
    throw OracleLimitError("empirical_fim: dimension " + std::to_string(loss.dim()) +
                           " exceeds oracle limit " + std::to_string(limit));
  }
  const auto n = static_cast<Eigen::Index>(loss.dim());
  DMatrix f = DMatrix::Zero(n, n);
  for (std::size_t t = 0; t < loss.data().size(); ++t) {
    const DMatrix jac = loss.output_jacobian(theta, t);
    f.noalias() += jac.transpose() * jac;
  }
  f /= static_cast<double>(loss.data().size());
  return SymMatrix::symmetrized(f);
}

// ---------------------------------------------------------------------------

MlpCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint", path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("checkpoint " + path + ": " + e.what());
  }
  MlpCheckpoint ckpt;
  try {
    ckpt.layer_sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
    const auto w = j.at("weights").get<std::vector<double>>();
    ckpt.weights = Eigen::Map<const DVector>(w.data(), static_cast<Eigen::Index>(w.size()));
    ckpt.activation = j.value("activation", std::string("tanh"));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("checkpoint " + path + ": " + e.what());
  }
  if (ckpt.activation != "tanh") {
    throw ParseError("checkpoint " + path + ": unsupported activation '" + ckpt.activation + "'");
  }
  if (ckpt.layer_sizes.size() < 2) {
    throw ParseError("checkpoint " + path + ": layer_sizes needs at least two entries");
  }
  if (static_cast<std::size_t>(ckpt.weights.size()) != mlp_parameter_count(ckpt.layer_sizes)) {
    throw ParseError("checkpoint " + path + ": expected " +
                     std::to_string(mlp_parameter_count(ckpt.layer_sizes)) + " weights, got " +
                     std::to_string(ckpt.weights.size()));
  }
  return ckpt;
}

void save_checkpoint(const std::string& path, const MlpCheckpoint& ckpt) {
  nlohmann::json j;
  j["layer_sizes"] = ckpt.layer_sizes;
  j["weights"] = std::vector<double>(ckpt.weights.begin(), ckpt.weights.end());
  j["activation"] = ckpt.activation;
  write_text_file(path, j.dump(2) + "\n");
}

Dataset load_dataset_csv(const std::string& path, std::size_t n_inputs, std::size_t n_outputs) {
  const auto table = read_csv(path);
  const std::size_t cols = n_inputs + n_outputs;
  if (table.header.size() != cols) {
    throw ParseError("dataset " + path + ": header has " + std::to_string(table.header.size()) +
                     " columns, expected " + std::to_string(cols));
  }
  if (table.rows.empty()) throw ParseError("dataset " + path + ": no samples");
  Dataset data;
  const auto t = static_cast<Eigen::Index>(table.rows.size());
  data.inputs.resize(t, static_cast<Eigen::Index>(n_inputs));
  data.targets.resize(t, static_cast<Eigen::Index>(n_outputs));
  for (Eigen::Index r = 0; r < t; ++r) {
    const auto& row = table.rows[static_cast<std::size_t>(r)];
    for (std::size_t c = 0; c < n_inputs; ++c) data.inputs(r, static_cast<Eigen::Index>(c)) = row[c];
    for (std::size_t c = 0; c < n_outputs; ++c)
      data.targets(r, static_cast<Eigen::Index>(c)) = row[n_inputs + c];
  }
  return data;
}

void save_dataset_csv(const std::string& path, const Dataset& data) {
  std::vector<std::string> header;
  for (Eigen::Index c = 0; c < data.inputs.cols(); ++c) header.push_back("x" + std::to_string(c));
  for (Eigen::Index c = 0; c < data.targets.cols(); ++c) header.push_back("y" + std::to_string(c));
  CsvWriter csv(header);
  for (Eigen::Index r = 0; r < data.inputs.rows(); ++r) {
    std::vector<double> row;
    for (Eigen::Index c = 0; c < data.inputs.cols(); ++c) row.push_back(data.inputs(r, c));
    for (Eigen::Index c = 0; c < data.targets.cols(); ++c) row.push_back(data.targets(r, c));
    csv.row(row);
  }
  write_text_file(path, csv.str());
}

}  // namespace curvlens
