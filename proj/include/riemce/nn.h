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

#ifndef RIEMCE_NN_H_
#define RIEMCE_NN_H_

// Small dense-network kernel: fully connected layers with optional
// batch normalization, inference and training passes, exact input Jacobians
// and first-order optimizers. Everything is double precision.

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "riemce/rng.h"

namespace riemce::nn {

enum class Activation { kIdentity, kTanh, kSigmoid, kSoftplus };

std::string_view ActivationName(Activation activation);
Activation ParseActivation(std::string_view name);

// Numerically stable scalar helpers shared with the model code.
double Sigmoid(double x);
double Softplus(double x);

// Inference-mode batch normalization uses the running statistics only, so a
// frozen layer is the affine map x -> scale * (x - mean) / sqrt(var + eps) + shift.
struct BatchNorm {
  Eigen::VectorXd running_mean;
  Eigen::VectorXd running_var;
  Eigen::VectorXd scale;
  Eigen::VectorXd shift;
  double epsilon = 1e-5;
  double momentum = 0.1;

  static BatchNorm Identity(Eigen::Index width);

  // Per-feature slope of the inference affine map.
  Eigen::VectorXd InferenceGain() const;
};

// y = act(bn(W x + b)).
struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
  Activation activation = Activation::kIdentity;
  std::optional<BatchNorm> batchnorm;

  Eigen::Index in_dim() const { return weight.cols(); }
  Eigen::Index out_dim() const { return weight.rows(); }
};

struct LayerSpec {
  Eigen::Index width;
  Activation activation;
  bool batchnorm = false;
};

// Gradients aligned one-to-one with DenseNet::Parameters().
using Gradients = std::vector<Eigen::VectorXd>;

class DenseNet {
 public:
  DenseNet() = default;

  // Weights and biases drawn from U(-1/sqrt(in), 1/sqrt(in)).
  DenseNet(Eigen::Index input_dim, std::span<const LayerSpec> specs, Rng& rng);

  // Takes ownership of explicit layers. Throws ShapeError / ConfigError when
  // dimensions do not chain or a running variance is not positive.
  explicit DenseNet(std::vector<DenseLayer> layers);

  Eigen::Index input_dim() const;
  Eigen::Index output_dim() const;
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& mutable_layers() { return layers_; }
  bool empty() const { return layers_.empty(); }

  // Inference mode: pure, deterministic.
  Eigen::VectorXd Forward(const Eigen::VectorXd& x) const;
  // Columns are samples.
  Eigen::MatrixXd ForwardBatch(const Eigen::MatrixXd& x) const;

  // Exact d(output)/d(input), out x in, by forward accumulation of the
  // per-layer derivative matrices. Optionally returns the output as well.
  Eigen::MatrixXd Jacobian(const Eigen::VectorXd& x,
                           Eigen::VectorXd* output = nullptr) const;

  // Flat views over every trainable array: per layer weight (column-major),
  // bias, then batchnorm scale and shift if present.
  std::vector<std::span<double>> Parameters();
  std::vector<std::span<const double>> Parameters() const;
  Gradients ZeroGradients() const;
  std::size_t ParameterCount() const;

  void Validate() const;

 private:
  void CheckInput(Eigen::Index rows) const;

  std::vector<DenseLayer> layers_;
};

// Train-mode forward/backward over a batch. Batch normalization uses batch
// statistics and (optionally) updates the running estimates.
class TrainingPass {
 public:
  explicit TrainingPass(DenseNet& net, bool update_running_stats = true)
      : net_(&net), update_running_stats_(update_running_stats) {}

  Eigen::MatrixXd Forward(const Eigen::MatrixXd& x);

  // Gradients of a scalar batch loss whose derivative w.r.t. the network
  // output is `upstream` (same shape as the output). Throws StateError if
  // Forward has not been called for this pass.
  Gradients Backward(const Eigen::MatrixXd& upstream,
                     Eigen::MatrixXd* input_grad = nullptr) const;

 private:
  struct LayerCache {
    Eigen::MatrixXd input;
    Eigen::MatrixXd normalized;  // x_hat, when batchnorm is present
    Eigen::VectorXd inv_std;
    Eigen::MatrixXd pre_activation;
    Eigen::MatrixXd output;
  };

  DenseNet* net_;
  bool update_running_stats_;
  std::vector<LayerCache> cache_;
};

// Adds the gradient of l2 * ||theta||^2, i.e. 2 * l2 * theta.
void AddL2Gradient(std::span<const std::span<double>> params, double l2,
                   Gradients& grads);

enum class OptimizerKind { kAdam, kRmsprop };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double decay = 0.99;  // RMSprop smoothing constant
  double epsilon = 1e-8;
  double l2 = 0.0;
};

class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config) : config_(config) {}

  // Applies one update in place. Accumulators are created on the first call
  // and must match the parameter shapes on every later call.
  void Step(std::span<const std::span<double>> params, Gradients grads);

  const OptimizerConfig& config() const { return config_; }
  std::size_t step_count() const { return step_; }

 private:
  OptimizerConfig config_;
  std::size_t step_ = 0;
  std::vector<Eigen::VectorXd> first_moment_;
  std::vector<Eigen::VectorXd> second_moment_;
};

}  // namespace riemce::nn

#endif  // RIEMCE_NN_H_
