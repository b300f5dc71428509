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

#include "nfsip/neural.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace nfsip::neural {
namespace {

std::string ShapeString(const NetworkShape& shape) {
  std::ostringstream out;
  out << shape.input_size;
  for (int h : shape.hidden_sizes) out << "-" << h;
  out << "-" << shape.output_size;
  return out.str();
}

void CheckShape(const NetworkShape& shape) {
  if (shape.input_size <= 0 || shape.output_size <= 0) {
    throw std::invalid_argument("network shape " + ShapeString(shape) +
                                ": input and output sizes must be positive");
  }
  for (int h : shape.hidden_sizes) {
    if (h <= 0) {
      throw std::invalid_argument("network shape " + ShapeString(shape) +
                                  ": hidden sizes must be positive");
    }
  }
}

// Normalizes each column of `pre` and applies gain/offset.
void NormalizeColumns(const Matrix& pre, const Vector& gain,
                      const Vector& offset, double eps, Matrix* normalized,
                      RowVector* inv_std, Matrix* out) {
  const RowVector mean = pre.colwise().mean();
  *normalized = pre.rowwise() - mean;
  const RowVector var = normalized->array().square().colwise().mean();
  *inv_std = (var.array() + eps).rsqrt();
  normalized->array().rowwise() *= inv_std->array();
  *out = normalized->array().colwise() * gain.array();
  out->colwise() += offset;
}

Matrix ForwardImpl(const ParameterSet& params, const Matrix& inputs,
                   ForwardTrace* trace) {
  const NetworkShape& shape = params.shape();
  if (inputs.rows() != shape.input_size) {
    throw std::invalid_argument(
        "forward: input has " + std::to_string(inputs.rows()) +
        " features, network " + ShapeString(shape) + " expects " +
        std::to_string(shape.input_size));
  }
  if (trace != nullptr) {
    trace->shape = shape;
    trace->layers.assign(shape.num_layers(), LayerTrace{});
  }
  Matrix x = inputs;
  Matrix normalized;
  RowVector inv_std;
  Matrix activated;
  const int last = shape.num_layers() - 1;
  for (int l = 0; l <= last; ++l) {
    const LayerTensors& layer = params.layers()[l];
    Matrix pre = layer.weight * x;
    pre.colwise() += layer.bias;
    if (trace != nullptr) trace->layers[l].input = x;
    if (l == last) {
      x = std::move(pre);
      break;
    }
    NormalizeColumns(pre, layer.gain, layer.offset, kLayerNormEps, &normalized,
                     &inv_std, &activated);
    x = activated.cwiseMax(0.0);
    if (trace != nullptr) {
      trace->layers[l].normalized = std::move(normalized);
      trace->layers[l].activated = std::move(activated);
      trace->layers[l].inv_std = std::move(inv_std);
    }
  }
  if (trace != nullptr) trace->output = x;
  return x;
}

}  // namespace

int NetworkShape::layer_input(int layer) const {
  return layer == 0 ? input_size : hidden_sizes[layer - 1];
}

int NetworkShape::layer_output(int layer) const {
  return layer == num_layers() - 1 ? output_size : hidden_sizes[layer];
}

TensorBundle::TensorBundle(NetworkShape shape, double gain_fill)
    : shape_(std::move(shape)) {
  CheckShape(shape_);
  const int n = shape_.num_layers();
  layers_.resize(n);
  for (int l = 0; l < n; ++l) {
    const int in = shape_.layer_input(l);
    const int out = shape_.layer_output(l);
    layers_[l].weight = Matrix::Zero(out, in);
    layers_[l].bias = Vector::Zero(out);
    if (l < n - 1) {
      layers_[l].gain = Vector::Constant(out, gain_fill);
      layers_[l].offset = Vector::Zero(out);
    }
  }
}

std::vector<std::span<double>> TensorBundle::Views() {
  std::vector<std::span<double>> views;
  for (LayerTensors& layer : layers_) {
    views.emplace_back(layer.weight.data(), layer.weight.size());
    views.emplace_back(layer.bias.data(), layer.bias.size());
    if (layer.gain.size() > 0) {
      views.emplace_back(layer.gain.data(), layer.gain.size());
      views.emplace_back(layer.offset.data(), layer.offset.size());
    }
  }
  return views;
}

std::vector<std::span<const double>> TensorBundle::Views() const {
  std::vector<std::span<const double>> views;
  for (const LayerTensors& layer : layers_) {
    views.emplace_back(layer.weight.data(), layer.weight.size());
    views.emplace_back(layer.bias.data(), layer.bias.size());
    if (layer.gain.size() > 0) {
      views.emplace_back(layer.gain.data(), layer.gain.size());
      views.emplace_back(layer.offset.data(), layer.offset.size());
    }
  }
  return views;
}

std::vector<std::string> TensorBundle::TensorNames() const {
  std::vector<std::string> names;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const std::string prefix = "layer" + std::to_string(l) + ".";
    names.push_back(prefix + "weight");
    names.push_back(prefix + "bias");
    if (layers_[l].gain.size() > 0) {
      names.push_back(prefix + "gain");
      names.push_back(prefix + "offset");
    }
  }
  return names;
}

std::int64_t TensorBundle::num_values() const {
  std::int64_t n = 0;
  for (const auto& view : Views()) n += static_cast<std::int64_t>(view.size());
  return n;
}

bool TensorBundle::AllFinite() const {
  for (const auto& view : Views()) {
    for (double v : view) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

bool TensorBundle::SameShape(const TensorBundle& other) const {
  return shape_ == other.shape_;
}

ParameterSet::ParameterSet(NetworkShape shape)
    : TensorBundle(std::move(shape), 1.0) {}

ParameterSet ParameterSet::Initialize(NetworkShape shape, Rng& rng) {
  ParameterSet params(std::move(shape));
  for (LayerTensors& layer : params.layers()) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.weight.cols()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    // Fill in a fixed row-major order so the draw sequence does not depend
    // on storage layout.
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
        layer.weight(r, c) = dist(rng);
      }
    }
  }
  return params;
}

GradientSet::GradientSet(NetworkShape shape)
    : TensorBundle(std::move(shape), 0.0) {}

GradientSet& GradientSet::operator+=(const GradientSet& other) {
  if (!SameShape(other)) {
    throw std::invalid_argument("gradient sum: shape mismatch");
  }
  auto mine = Views();
  auto theirs = other.Views();
  for (std::size_t t = 0; t < mine.size(); ++t) {
    for (std::size_t i = 0; i < mine[t].size(); ++i) mine[t][i] += theirs[t][i];
  }
  return *this;
}

GradientSet& GradientSet::operator*=(double scale) {
  for (auto view : Views()) {
    for (double& v : view) v *= scale;
  }
  return *this;
}

double GradientSet::MaxAbs() const {
  double m = 0.0;
  for (const auto& view : Views()) {
    for (double v : view) m = std::max(m, std::abs(v));
  }
  return m;
}

ForwardTrace Forward(const ParameterSet& params, const Matrix& inputs) {
  ForwardTrace trace;
  ForwardImpl(params, inputs, &trace);
  return trace;
}

ForwardTrace Forward(const ParameterSet& params, const Vector& input) {
  return Forward(params, Matrix(input));
}

Matrix Predict(const ParameterSet& params, const Matrix& inputs) {
  return ForwardImpl(params, inputs, nullptr);
}

Vector Predict(const ParameterSet& params, const Vector& input) {
  return ForwardImpl(params, Matrix(input), nullptr).col(0);
}

GradientSet Backward(const ParameterSet& params, const ForwardTrace& trace,
                     const Matrix& output_grad) {
  const NetworkShape& shape = params.shape();
  if (!(trace.shape == shape) ||
      static_cast<int>(trace.layers.size()) != shape.num_layers()) {
    throw std::invalid_argument("backward: trace was produced by network " +
                                ShapeString(trace.shape) + ", not " +
                                ShapeString(shape));
  }
  if (output_grad.rows() != trace.output.rows() ||
      output_grad.cols() != trace.output.cols()) {
    throw std::invalid_argument("backward: output gradient is " +
                                std::to_string(output_grad.rows()) + "x" +
                                std::to_string(output_grad.cols()) +
                                ", output is " +
                                std::to_string(trace.output.rows()) + "x" +
                                std::to_string(trace.output.cols()));
  }
  GradientSet grad(shape);
  Matrix delta = output_grad;
  for (int l = shape.num_layers() - 1; l >= 0; --l) {
    const LayerTensors& layer = params.layers()[l];
    const LayerTrace& lt = trace.layers[l];
    LayerTensors& g = grad.layers()[l];
    if (l < shape.num_layers() - 1) {
      // delta arrives as d loss / d relu output.
      Matrix dy = (lt.activated.array() > 0.0).select(delta, 0.0);
      g.gain = (dy.array() * lt.normalized.array()).rowwise().sum();
      g.offset = dy.rowwise().sum();
      Matrix dxhat = dy.array().colwise() * layer.gain.array();
      const RowVector mean_dxhat = dxhat.colwise().mean();
      const RowVector mean_dxhat_xhat =
          (dxhat.array() * lt.normalized.array()).colwise().mean();
      Matrix dz = dxhat.rowwise() - mean_dxhat;
      dz.array() -= lt.normalized.array().rowwise() * mean_dxhat_xhat.array();
      dz.array().rowwise() *= lt.inv_std.array();
      delta = std::move(dz);
    }
    g.weight.noalias() = delta * lt.input.transpose();
    g.bias = delta.rowwise().sum();
    if (l > 0) delta = layer.weight.transpose() * delta;
  }
  return grad;
}

Vector LayerNorm(const Vector& x, const Vector& gain, const Vector& offset,
                 double eps) {
  if (x.size() != gain.size() || x.size() != offset.size()) {
    throw std::invalid_argument("layer_norm: length mismatch (x " +
                                std::to_string(x.size()) + ", gain " +
                                std::to_string(gain.size()) + ", offset " +
                                std::to_string(offset.size()) + ")");
  }
  if (!(eps > 0.0)) throw std::invalid_argument("layer_norm: eps must be > 0");
  Matrix normalized;
  RowVector inv_std;
  Matrix out;
  NormalizeColumns(Matrix(x), gain, offset, eps, &normalized, &inv_std, &out);
  return out.col(0);
}

Vector Softmax(const Vector& logits) {
  return Softmax(Matrix(logits)).col(0);
}

Vector LogSoftmax(const Vector& logits) {
  return LogSoftmax(Matrix(logits)).col(0);
}

Matrix Softmax(const Matrix& logits) {
  Matrix shifted = logits.rowwise() - logits.colwise().maxCoeff();
  Matrix e = shifted.array().exp();
  const RowVector sums = e.colwise().sum();
  e.array().rowwise() /= sums.array();
  return e;
}

Matrix LogSoftmax(const Matrix& logits) {
  Matrix shifted = logits.rowwise() - logits.colwise().maxCoeff();
  const RowVector log_sums = shifted.array().exp().colwise().sum().log();
  shifted.rowwise() -= log_sums;
  return shifted;
}

Optimizer::Optimizer(OptimizerConfig config, const NetworkShape& shape)
    : config_(config), first_moment_(shape), second_moment_(shape) {}

bool Optimizer::Step(ParameterSet& params, const GradientSet& grad,
                     double learning_rate) {
  if (!params.SameShape(grad) || !params.SameShape(first_moment_)) {
    throw std::invalid_argument("optimizer step: shape mismatch");
  }
  if (learning_rate < 0.0 || !std::isfinite(learning_rate)) {
    throw std::invalid_argument("optimizer step: learning rate must be >= 0");
  }
  if (!grad.AllFinite()) return false;

  auto p = params.Views();
  auto g = grad.Views();
  if (config_.kind == OptimizerKind::kSgd) {
    std::vector<std::vector<double>> next(p.size());
    for (std::size_t t = 0; t < p.size(); ++t) {
      next[t].resize(p[t].size());
      for (std::size_t i = 0; i < p[t].size(); ++i) {
        next[t][i] = p[t][i] - learning_rate * g[t][i];
        if (!std::isfinite(next[t][i])) return false;
      }
    }
    for (std::size_t t = 0; t < p.size(); ++t) {
      std::copy(next[t].begin(), next[t].end(), p[t].begin());
    }
    ++steps_;
    return true;
  }

  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const std::int64_t step = steps_ + 1;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
  auto m = first_moment_.Views();
  auto v = second_moment_.Views();
  std::vector<std::vector<double>> next_p(p.size()), next_m(p.size()),
      next_v(p.size());
  for (std::size_t t = 0; t < p.size(); ++t) {
    const std::size_t n = p[t].size();
    next_p[t].resize(n);
    next_m[t].resize(n);
    next_v[t].resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double gi = g[t][i];
      const double mi = b1 * m[t][i] + (1.0 - b1) * gi;
      const double vi = b2 * v[t][i] + (1.0 - b2) * gi * gi;
      const double update =
          (mi / c1) / (std::sqrt(vi / c2) + config_.epsilon);
      next_m[t][i] = mi;
      next_v[t][i] = vi;
      next_p[t][i] = p[t][i] - learning_rate * update;
      if (!std::isfinite(next_p[t][i])) return false;
    }
  }
  for (std::size_t t = 0; t < p.size(); ++t) {
    std::copy(next_p[t].begin(), next_p[t].end(), p[t].begin());
    std::copy(next_m[t].begin(), next_m[t].end(), m[t].begin());
    std::copy(next_v[t].begin(), next_v[t].end(), v[t].begin());
  }
  steps_ = step;
  return true;
}

GradientSet FiniteDifferenceGradient(
    const std::function<double(const ParameterSet&)>& loss,
    const ParameterSet& params, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite difference: h must be > 0");
  ParameterSet probe = params;
  GradientSet grad = GradientSet::ZerosLike(params);
  auto probe_views = probe.Views();
  auto grad_views = grad.Views();
  for (std::size_t t = 0; t < probe_views.size(); ++t) {
    for (std::size_t i = 0; i < probe_views[t].size(); ++i) {
      const double saved = probe_views[t][i];
      probe_views[t][i] = saved + h;
      const double up = loss(probe);
      probe_views[t][i] = saved - h;
      const double down = loss(probe);
      probe_views[t][i] = saved;
      grad_views[t][i] = (up - down) / (2.0 * h);
    }
  }
  return grad;
}

double MaxRelativeError(const GradientSet& a, const GradientSet& b,
                        double floor) {
  if (!a.SameShape(b)) throw std::invalid_argument("relative error: shape mismatch");
  double worst = 0.0;
  auto av = a.Views();
  auto bv = b.Views();
  for (std::size_t t = 0; t < av.size(); ++t) {
    for (std::size_t i = 0; i < av[t].size(); ++i) {
      const double denom =
          std::max({std::abs(av[t][i]), std::abs(bv[t][i]), floor});
      worst = std::max(worst, std::abs(av[t][i] - bv[t][i]) / denom);
    }
  }
  return worst;
}

namespace {

constexpr const char* kCheckpointHeader = "NFSIP-CKPT v1";

void WriteTensor(std::ostream& out, const std::string& name,
                 const Matrix& values) {
  out << name << "\n" << values.rows() << " " << values.cols() << "\n";
  char buf[40];
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.8e", values(r, c));
      out << buf << "\n";
    }
  }
}

void WriteTensor(std::ostream& out, const std::string& name,
                 const Vector& values) {
  out << name << "\n" << values.size() << "\n";
  char buf[40];
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.8e", values(i));
    out << buf << "\n";
  }
}

struct RawTensor {
  std::vector<long> dims;
  std::vector<double> values;
};

}  // namespace

void WriteCheckpoint(
    std::ostream& out,
    const std::vector<std::pair<std::string, const ParameterSet*>>& networks) {
  out << kCheckpointHeader << "\n";
  for (const auto& [net, params] : networks) {
    if (net.empty() || net.find('.') != std::string::npos) {
      throw std::invalid_argument("checkpoint: bad network name '" + net + "'");
    }
    for (std::size_t l = 0; l < params->layers().size(); ++l) {
      const LayerTensors& layer = params->layers()[l];
      const std::string prefix = net + ".layer" + std::to_string(l) + ".";
      WriteTensor(out, prefix + "weight", layer.weight);
      WriteTensor(out, prefix + "bias", layer.bias);
      if (layer.gain.size() > 0) {
        WriteTensor(out, prefix + "gain", layer.gain);
        WriteTensor(out, prefix + "offset", layer.offset);
      }
    }
  }
}

std::map<std::string, ParameterSet> ReadCheckpoint(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCheckpointHeader) {
    throw std::runtime_error("checkpoint: missing '" +
                             std::string(kCheckpointHeader) + "' header");
  }
  // network -> layer -> field -> tensor
  std::map<std::string, std::map<int, std::map<std::string, RawTensor>>> raw;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::string name = line;
    const auto first_dot = name.find('.');
    const auto last_dot = name.rfind('.');
    if (first_dot == std::string::npos || first_dot == last_dot ||
        name.compare(first_dot + 1, 5, "layer") != 0) {
      throw std::runtime_error("checkpoint: bad tensor name '" + name + "'");
    }
    const std::string net = name.substr(0, first_dot);
    const int layer = std::stoi(name.substr(first_dot + 6, last_dot - first_dot - 6));
    const std::string field = name.substr(last_dot + 1);
    if (!std::getline(in, line)) {
      throw std::runtime_error("checkpoint: missing shape for " + name);
    }
    RawTensor tensor;
    std::istringstream dims(line);
    long d;
    long count = 1;
    while (dims >> d) {
      if (d < 0) throw std::runtime_error("checkpoint: negative dim in " + name);
      tensor.dims.push_back(d);
      count *= d;
    }
    if (tensor.dims.empty() || tensor.dims.size() > 2) {
      throw std::runtime_error("checkpoint: bad shape line for " + name);
    }
    tensor.values.resize(count);
    for (long i = 0; i < count; ++i) {
      if (!std::getline(in, line)) {
        throw std::runtime_error("checkpoint: truncated values for " + name);
      }
      tensor.values[i] = std::stod(line);
    }
    raw[net][layer][field] = std::move(tensor);
  }

  std::map<std::string, ParameterSet> result;
  for (auto& [net, layers] : raw) {
    const int n = static_cast<int>(layers.size());
    NetworkShape shape;
    shape.hidden_sizes.clear();
    for (int l = 0; l < n; ++l) {
      auto it = layers.find(l);
      if (it == layers.end() || !it->second.count("weight") ||
          !it->second.count("bias")) {
        throw std::runtime_error("checkpoint: network " + net +
                                 " is missing layer " + std::to_string(l));
      }
      const RawTensor& w = it->second.at("weight");
      if (w.dims.size() != 2) {
        throw std::runtime_error("checkpoint: weight of " + net + " layer " +
                                 std::to_string(l) + " is not a matrix");
      }
      if (l == 0) shape.input_size = static_cast<int>(w.dims[1]);
      if (l == n - 1) {
        shape.output_size = static_cast<int>(w.dims[0]);
      } else {
        shape.hidden_sizes.push_back(static_cast<int>(w.dims[0]));
      }
    }
    ParameterSet params(shape);
    for (int l = 0; l < n; ++l) {
      LayerTensors& dst = params.layers()[l];
      auto& fields = layers.at(l);
      auto load_matrix = [&](Matrix& m, const RawTensor& t) {
        if (t.dims.size() != 2 || t.dims[0] != m.rows() || t.dims[1] != m.cols()) {
          throw std::runtime_error("checkpoint: inconsistent weight shape in " + net);
        }
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
          for (Eigen::Index c = 0; c < m.cols(); ++c) {
            m(r, c) = t.values[r * m.cols() + c];
          }
        }
      };
      auto load_vector = [&](Vector& v, const std::string& field) {
        auto it = fields.find(field);
        if (it == fields.end() || it->second.dims.size() != 1 ||
            it->second.dims[0] != v.size()) {
          throw std::runtime_error("checkpoint: missing or inconsistent " +
                                   field + " in " + net + " layer " +
                                   std::to_string(l));
        }
        for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = it->second.values[i];
      };
      load_matrix(dst.weight, fields.at("weight"));
      load_vector(dst.bias, "bias");
      if (l < n - 1) {
        load_vector(dst.gain, "gain");
        load_vector(dst.offset, "offset");
      }
    }
    result.emplace(net, std::move(params));
  }
  return result;
}

}  // namespace nfsip::neural
