/*
 * Copyright 2026 The riemce Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "riemce/nn.h"

#include <cmath>
#include <string>

#include "riemce/errors.h"

namespace riemce::nn {
namespace {

Eigen::MatrixXd Activate(Activation activation, const Eigen::MatrixXd& a) {
  switch (activation) {
    case Activation::kIdentity:
      return a;
    case Activation::kTanh:
      return a.array().tanh().matrix();
    case Activation::kSigmoid:
      return a.unaryExpr([](double v) { return Sigmoid(v); });
    case Activation::kSoftplus:
      return a.unaryExpr([](double v) { return Softplus(v); });
  }
  return a;
}

// Elementwise derivative given pre-activation `a` and output `y`.
Eigen::MatrixXd ActivationSlope(Activation activation, const Eigen::MatrixXd& a,
                                const Eigen::MatrixXd& y) {
  switch (activation) {
    case Activation::kIdentity:
      return Eigen::MatrixXd::Ones(a.rows(), a.cols());
    case Activation::kTanh:
      return (1.0 - y.array().square()).matrix();
    case Activation::kSigmoid:
      return (y.array() * (1.0 - y.array())).matrix();
    case Activation::kSoftplus:
      return a.unaryExpr([](double v) { return Sigmoid(v); });
  }
  return Eigen::MatrixXd::Ones(a.rows(), a.cols());
}

}  // namespace

std::string_view ActivationName(Activation activation) {
  switch (activation) {
    case Activation::kIdentity:
      return "identity";
    case Activation::kTanh:
      return "tanh";
    case Activation::kSigmoid:
      return "sigmoid";
    case Activation::kSoftplus:
      return "softplus";
  }
  return "identity";
}

Activation ParseActivation(std::string_view name) {
  if (name == "identity") return Activation::kIdentity;
  if (name == "tanh") return Activation::kTanh;
  if (name == "sigmoid") return Activation::kSigmoid;
  if (name == "softplus") return Activation::kSoftplus;
  throw SchemaError("unknown activation '" + std::string(name) + "'");
}

double Sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double Softplus(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

BatchNorm BatchNorm::Identity(Eigen::Index width) {
  BatchNorm bn;
  bn.running_mean = Eigen::VectorXd::Zero(width);
  bn.running_var = Eigen::VectorXd::Ones(width);
  bn.scale = Eigen::VectorXd::Ones(width);
  bn.shift = Eigen::VectorXd::Zero(width);
  return bn;
}

Eigen::VectorXd BatchNorm::InferenceGain() const {
  return (scale.array() / (running_var.array() + epsilon).sqrt()).matrix();
}

DenseNet::DenseNet(Eigen::Index input_dim, std::span<const LayerSpec> specs,
                   Rng& rng) {
  Eigen::Index in = input_dim;
  for (const LayerSpec& spec : specs) {
    DenseLayer layer;
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    layer.weight.resize(spec.width, in);
    // Column-major fill keeps the draw order tied to the storage order.
    for (Eigen::Index c = 0; c < in; ++c)
      for (Eigen::Index r = 0; r < spec.width; ++r)
        layer.weight(r, c) = rng.Uniform(-bound, bound);
    layer.bias.resize(spec.width);
    for (Eigen::Index r = 0; r < spec.width; ++r)
      layer.bias(r) = rng.Uniform(-bound, bound);
    layer.activation = spec.activation;
    if (spec.batchnorm) layer.batchnorm = BatchNorm::Identity(spec.width);
    layers_.push_back(std::move(layer));
    in = spec.width;
  }
  Validate();
}

DenseNet::DenseNet(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  Validate();
}

void DenseNet::Validate() const {
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const DenseLayer& layer = layers_[k];
    if (layer.bias.size() != layer.out_dim())
      throw ShapeError("layer " + std::to_string(k) + ": bias length " +
                       std::to_string(layer.bias.size()) + " != out dim " +
                       std::to_string(layer.out_dim()));
    if (k > 0 && layers_[k - 1].out_dim() != layer.in_dim())
      throw ShapeError("layer " + std::to_string(k) + ": input dim " +
                       std::to_string(layer.in_dim()) +
                       " does not chain with previous output " +
                       std::to_string(layers_[k - 1].out_dim()));
    if (layer.batchnorm) {
      const BatchNorm& bn = *layer.batchnorm;
      const Eigen::Index w = layer.out_dim();
      if (bn.running_mean.size() != w || bn.running_var.size() != w ||
          bn.scale.size() != w || bn.shift.size() != w)
        throw ShapeError("layer " + std::to_string(k) +
                         ": batchnorm width mismatch");
      if ((bn.running_var.array() <= 0.0).any())
        throw ConfigError("layer " + std::to_string(k) +
                          ": batchnorm running variance must be positive");
      if (!(bn.epsilon > 0.0))
        throw ConfigError("batchnorm epsilon must be positive");
    }
  }
}

Eigen::Index DenseNet::input_dim() const {
  return layers_.empty() ? 0 : layers_.front().in_dim();
}

Eigen::Index DenseNet::output_dim() const {
  return layers_.empty() ? 0 : layers_.back().out_dim();
}

void DenseNet::CheckInput(Eigen::Index rows) const {
  if (layers_.empty()) throw StateError("network has no layers");
  if (rows != input_dim())
    throw ShapeError("input length " + std::to_string(rows) +
                     " != network input dim " + std::to_string(input_dim()));
}

Eigen::VectorXd DenseNet::Forward(const Eigen::VectorXd& x) const {
  CheckInput(x.size());
  Eigen::VectorXd h = x;
  for (const DenseLayer& layer : layers_) {
    Eigen::VectorXd a = layer.weight * h + layer.bias;
    if (layer.batchnorm) {
      const BatchNorm& bn = *layer.batchnorm;
      a = (bn.InferenceGain().array() * (a - bn.running_mean).array() +
           bn.shift.array())
              .matrix();
    }
    h = Activate(layer.activation, a);
  }
  return h;
}

Eigen::MatrixXd DenseNet::ForwardBatch(const Eigen::MatrixXd& x) const {
  CheckInput(x.rows());
  Eigen::MatrixXd h = x;
  for (const DenseLayer& layer : layers_) {
    Eigen::MatrixXd a = layer.weight * h;
    a.colwise() += layer.bias;
    if (layer.batchnorm) {
      const BatchNorm& bn = *layer.batchnorm;
      const Eigen::VectorXd gain = bn.InferenceGain();
      const Eigen::VectorXd offset =
          bn.shift - (gain.array() * bn.running_mean.array()).matrix();
      a = gain.asDiagonal() * a;
      a.colwise() += offset;
    }
    h = Activate(layer.activation, a);
  }
  return h;
}

Eigen::MatrixXd DenseNet::Jacobian(const Eigen::VectorXd& x,
                                   Eigen::VectorXd* output) const {
  CheckInput(x.size());
  Eigen::VectorXd h = x;
  Eigen::MatrixXd jac;
  bool first = true;
  for (const DenseLayer& layer : layers_) {
    Eigen::VectorXd a = layer.weight * h + layer.bias;
    if (first) {
      jac = layer.weight;
      first = false;
    } else {
      jac = layer.weight * jac;
    }
    if (layer.batchnorm) {
      const BatchNorm& bn = *layer.batchnorm;
      const Eigen::VectorXd gain = bn.InferenceGain();
      a = (gain.array() * (a - bn.running_mean).array() + bn.shift.array())
              .matrix();
      jac = gain.asDiagonal() * jac;
    }
    Eigen::VectorXd y = Activate(layer.activation, a);
    const Eigen::VectorXd slope = ActivationSlope(layer.activation, a, y);
    jac = slope.asDiagonal() * jac;
    h = std::move(y);
  }
  if (output) *output = h;
  return jac;
}

std::vector<std::span<double>> DenseNet::Parameters() {
  std::vector<std::span<double>> out;
  for (DenseLayer& layer : layers_) {
    out.emplace_back(layer.weight.data(), static_cast<std::size_t>(layer.weight.size()));
    out.emplace_back(layer.bias.data(), static_cast<std::size_t>(layer.bias.size()));
    if (layer.batchnorm) {
      out.emplace_back(layer.batchnorm->scale.data(),
                       static_cast<std::size_t>(layer.batchnorm->scale.size()));
      out.emplace_back(layer.batchnorm->shift.data(),
                       static_cast<std::size_t>(layer.batchnorm->shift.size()));
    }
  }
  return out;
}

std::vector<std::span<const double>> DenseNet::Parameters() const {
  std::vector<std::span<const double>> out;
  for (auto span : const_cast<DenseNet*>(this)->Parameters())
    out.emplace_back(span.data(), span.size());
  return out;
}

Gradients DenseNet::ZeroGradients() const {
  Gradients grads;
  for (auto span : Parameters())
    grads.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(span.size())));
  return grads;
}

std::size_t DenseNet::ParameterCount() const {
  std::size_t n = 0;
  for (auto span : Parameters()) n += span.size();
  return n;
}

Eigen::MatrixXd TrainingPass::Forward(const Eigen::MatrixXd& x) {
  if (net_->empty()) throw StateError("network has no layers");
  if (x.rows() != net_->input_dim())
    throw ShapeError("batch rows " + std::to_string(x.rows()) +
                     " != network input dim " + std::to_string(net_->input_dim()));
  if (x.cols() == 0) throw ShapeError("empty batch");
  cache_.clear();
  cache_.reserve(net_->layers().size());
  Eigen::MatrixXd h = x;
  const double n = static_cast<double>(x.cols());
  for (DenseLayer& layer : net_->mutable_layers()) {
    LayerCache c;
    c.input = h;
    Eigen::MatrixXd a = layer.weight * h;
    a.colwise() += layer.bias;
    if (layer.batchnorm) {
      BatchNorm& bn = *layer.batchnorm;
      const Eigen::VectorXd mean = a.rowwise().mean();
      const Eigen::MatrixXd centered = a.colwise() - mean;
      const Eigen::VectorXd var = centered.array().square().rowwise().sum() / n;
      c.inv_std = (var.array() + bn.epsilon).rsqrt().matrix();
      c.normalized = c.inv_std.asDiagonal() * centered;
      a = bn.scale.asDiagonal() * c.normalized;
      a.colwise() += bn.shift;
      if (update_running_stats_) {
        const double unbias = n > 1 ? n / (n - 1.0) : 1.0;
        bn.running_mean = (1.0 - bn.momentum) * bn.running_mean + bn.momentum * mean;
        bn.running_var =
            (1.0 - bn.momentum) * bn.running_var + bn.momentum * unbias * var;
      }
    }
    c.pre_activation = a;
    c.output = Activate(layer.activation, a);
    h = c.output;
    cache_.push_back(std::move(c));
  }
  return h;
}

Gradients TrainingPass::Backward(const Eigen::MatrixXd& upstream,
                                 Eigen::MatrixXd* input_grad) const {
  if (cache_.empty()) throw StateError("Backward called before Forward");
  const auto& layers = net_->layers();
  if (upstream.rows() != net_->output_dim() ||
      upstream.cols() != cache_.back().output.cols())
    throw ShapeError("upstream gradient shape does not match network output");

  // Per-layer gradients, assembled in Parameters() order at the end.
  std::vector<std::vector<Eigen::VectorXd>> per_layer(layers.size());
  Eigen::MatrixXd delta = upstream;
  const double n = static_cast<double>(upstream.cols());
  for (std::size_t k = layers.size(); k-- > 0;) {
    const DenseLayer& layer = layers[k];
    const LayerCache& c = cache_[k];
    delta = (delta.array() *
             ActivationSlope(layer.activation, c.pre_activation, c.output).array())
                .matrix();
    Eigen::VectorXd d_scale, d_shift;
    if (layer.batchnorm) {
      const BatchNorm& bn = *layer.batchnorm;
      d_scale = (delta.array() * c.normalized.array()).rowwise().sum().matrix();
      d_shift = delta.rowwise().sum();
      const Eigen::MatrixXd d_norm = bn.scale.asDiagonal() * delta;
      const Eigen::VectorXd sum_d = d_norm.rowwise().sum();
      const Eigen::VectorXd sum_dx =
          (d_norm.array() * c.normalized.array()).rowwise().sum().matrix();
      Eigen::MatrixXd d_pre = n * d_norm;
      d_pre.colwise() -= sum_d;
      d_pre -= sum_dx.asDiagonal() * c.normalized;
      delta = (c.inv_std / n).asDiagonal() * d_pre;
    }
    const Eigen::MatrixXd d_weight = delta * c.input.transpose();
    std::vector<Eigen::VectorXd>& g = per_layer[k];
    g.push_back(Eigen::Map<const Eigen::VectorXd>(d_weight.data(), d_weight.size()));
    g.push_back(delta.rowwise().sum());
    if (layer.batchnorm) {
      g.push_back(std::move(d_scale));
      g.push_back(std::move(d_shift));
    }
    if (k > 0 || input_grad) delta = layer.weight.transpose() * delta;
  }
  if (input_grad) *input_grad = delta;
  Gradients grads;
  for (auto& g : per_layer)
    for (auto& v : g) grads.push_back(std::move(v));
  return grads;
}

void AddL2Gradient(std::span<const std::span<double>> params, double l2,
                   Gradients& grads) {
  if (l2 == 0.0) return;
  if (grads.size() != params.size())
    throw ShapeError("gradient list does not match parameter list");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (static_cast<std::size_t>(grads[i].size()) != params[i].size())
      throw ShapeError("gradient " + std::to_string(i) + " shape mismatch");
    grads[i] += 2.0 * l2 *
                Eigen::Map<const Eigen::VectorXd>(params[i].data(),
                                                  static_cast<Eigen::Index>(params[i].size()));
  }
}

void Optimizer::Step(std::span<const std::span<double>> params, Gradients grads) {
  if (grads.size() != params.size())
    throw ShapeError("gradient list does not match parameter list");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (static_cast<std::size_t>(grads[i].size()) != params[i].size())
      throw ShapeError("gradient " + std::to_string(i) + " shape mismatch");
  if (first_moment_.empty()) {
    for (const auto& g : grads) {
      first_moment_.push_back(Eigen::VectorXd::Zero(g.size()));
      second_moment_.push_back(Eigen::VectorXd::Zero(g.size()));
    }
  } else if (first_moment_.size() != params.size()) {
    throw ShapeError("optimizer state does not match parameter list");
  }
  for (std::size_t i = 0; i < params.size(); ++i)
    if (second_moment_[i].size() != grads[i].size())
      throw ShapeError("optimizer accumulator " + std::to_string(i) +
                       " shape mismatch");

  AddL2Gradient(params, config_.l2, grads);
  ++step_;
  const double lr = config_.learning_rate;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Eigen::Map<Eigen::VectorXd> theta(params[i].data(),
                                      static_cast<Eigen::Index>(params[i].size()));
    const Eigen::VectorXd& g = grads[i];
    if (config_.kind == OptimizerKind::kAdam) {
      first_moment_[i] = config_.beta1 * first_moment_[i] + (1.0 - config_.beta1) * g;
      second_moment_[i] = config_.beta2 * second_moment_[i] +
                          (1.0 - config_.beta2) * g.array().square().matrix();
      const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
      const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
      theta.array() -= lr * (first_moment_[i].array() / c1) /
                       ((second_moment_[i].array() / c2).sqrt() + config_.epsilon);
    } else {
      second_moment_[i] = config_.decay * second_moment_[i] +
                          (1.0 - config_.decay) * g.array().square().matrix();
      theta.array() -=
          lr * g.array() / (second_moment_[i].array().sqrt() + config_.epsilon);
    }
  }
}

}  // namespace riemce::nn
