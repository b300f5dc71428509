// Copyright 2026 The NFSIP Authors. All rights reserved.
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

// A small fully connected network: every hidden layer is
//   affine -> layer norm -> ReLU
// and the output layer is affine only. The same network serves as Q-network
// (outputs are action values) and as policy network (outputs are logits).
// Forward and backward passes run on column batches: an input matrix has one
// sample per column.

#ifndef NFSIP_NEURAL_H_
#define NFSIP_NEURAL_H_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "nfsip/random.h"

namespace nfsip::neural {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

inline constexpr double kLayerNormEps = 1e-5;

struct NetworkShape {
  int input_size = 0;
  std::vector<int> hidden_sizes = {32, 32};
  int output_size = 0;

  int num_layers() const { return static_cast<int>(hidden_sizes.size()) + 1; }
  int layer_input(int layer) const;
  int layer_output(int layer) const;
  bool operator==(const NetworkShape&) const = default;
};

// Parameters of one affine layer. `gain` and `offset` are the layer-norm
// parameters and are empty for the output layer.
struct LayerTensors {
  Matrix weight;  // out x in
  Vector bias;
  Vector gain;
  Vector offset;
};

// Shared storage for parameter- and gradient-shaped tensor collections.
class TensorBundle {
 public:
  const NetworkShape& shape() const { return shape_; }
  std::vector<LayerTensors>& layers() { return layers_; }
  const std::vector<LayerTensors>& layers() const { return layers_; }

  // Flat views over every tensor. The order is fixed: per layer weight
  // (column-major), bias, gain, offset.
  std::vector<std::span<double>> Views();
  std::vector<std::span<const double>> Views() const;
  // Names matching Views(), e.g. "layer0.weight".
  std::vector<std::string> TensorNames() const;

  std::int64_t num_values() const;
  bool AllFinite() const;
  bool SameShape(const TensorBundle& other) const;

 protected:
  // Zero-filled tensors. Layer-norm gains are filled with `gain_fill`.
  TensorBundle(NetworkShape shape, double gain_fill);

 private:
  NetworkShape shape_;
  std::vector<LayerTensors> layers_;
};

class ParameterSet : public TensorBundle {
 public:
  // Zero weights and biases, unit gains, zero offsets.
  explicit ParameterSet(NetworkShape shape);

  // Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], zero biases,
  // unit gains, zero offsets.
  static ParameterSet Initialize(NetworkShape shape, Rng& rng);
};

class GradientSet : public TensorBundle {
 public:
  explicit GradientSet(NetworkShape shape);
  static GradientSet ZerosLike(const TensorBundle& like) {
    return GradientSet(like.shape());
  }

  GradientSet& operator+=(const GradientSet& other);
  GradientSet& operator*=(double scale);
  double MaxAbs() const;
};

struct LayerTrace {
  Matrix input;       // in x B
  Matrix normalized;  // (x - mean) / std, hidden layers only
  Matrix activated;   // post-norm values fed to the ReLU, hidden layers only
  RowVector inv_std;  // per column, hidden layers only
};

struct ForwardTrace {
  NetworkShape shape;
  std::vector<LayerTrace> layers;
  Matrix output;  // output_size x B
};

// Column-batched forward pass keeping everything backward needs.
ForwardTrace Forward(const ParameterSet& params, const Matrix& inputs);
ForwardTrace Forward(const ParameterSet& params, const Vector& input);

// Same arithmetic as Forward without storing the trace.
Matrix Predict(const ParameterSet& params, const Matrix& inputs);
Vector Predict(const ParameterSet& params, const Vector& input);

// Gradient of sum(output .* output_grad) with respect to every parameter,
// summed over the batch columns.
GradientSet Backward(const ParameterSet& params, const ForwardTrace& trace,
                     const Matrix& output_grad);

Vector LayerNorm(const Vector& x, const Vector& gain, const Vector& offset,
                 double eps = kLayerNormEps);

Vector Softmax(const Vector& logits);
Vector LogSoftmax(const Vector& logits);
// Column-wise variants.
Matrix Softmax(const Matrix& logits);
Matrix LogSoftmax(const Matrix& logits);

enum class OptimizerKind { kAdam, kSgd };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Gradient-descent optimizer owning its moment estimates. One instance per
// parameter set.
class Optimizer {
 public:
  Optimizer(OptimizerConfig config, const NetworkShape& shape);

  // Moves `params` against `grad`. Returns false, leaving params and state
  // untouched, if the gradient has non-finite entries or the step would
  // produce non-finite parameters.
  [[nodiscard]] bool Step(ParameterSet& params, const GradientSet& grad,
                          double learning_rate);

  const OptimizerConfig& config() const { return config_; }
  std::int64_t steps() const { return steps_; }

 private:
  OptimizerConfig config_;
  GradientSet first_moment_;
  GradientSet second_moment_;
  std::int64_t steps_ = 0;
};

// Central-difference estimate of d loss / d params for every parameter.
GradientSet FiniteDifferenceGradient(
    const std::function<double(const ParameterSet&)>& loss,
    const ParameterSet& params, double h = 1e-5);

// Max over all entries of |a - b| / max(|a|, |b|, floor).
double MaxRelativeError(const GradientSet& a, const GradientSet& b,
                        double floor = 1e-6);

// Checkpoint text format:
//   NFSIP-CKPT v1
//   <tensor name>
//   <shape, space separated>
//   <values, one per line, row-major, 9 significant digits>
//   ...
// Tensor names are "<network>.layer<i>.<weight|bias|gain|offset>".
void WriteCheckpoint(
    std::ostream& out,
    const std::vector<std::pair<std::string, const ParameterSet*>>& networks);
std::map<std::string, ParameterSet> ReadCheckpoint(std::istream& in);

}  // namespace nfsip::neural

#endif  // NFSIP_NEURAL_H_
