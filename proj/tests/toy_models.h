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

#ifndef RIEMCE_TESTS_TOY_MODELS_H_
#define RIEMCE_TESTS_TOY_MODELS_H_

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "riemce/models.h"
#include "riemce/nn.h"
#include "riemce/rng.h"

namespace riemce::testing {

// Randomly initialized VAE with tanh hidden layers, a sigmoid decoder and an
// RBF variance whose centers are drawn from N(0, center_spread^2 I).
inline models::VaeModel ToyVae(std::uint64_t seed, int latent_dim = 2, int ambient_dim = 4,
                               int hidden = 8, int centers = 6, double weight = 50.0,
                               double bandwidth = 0.7, double center_spread = 0.5) {
  Rng rng(seed);
  const std::vector<nn::LayerSpec> trunk = {{hidden, nn::Activation::kTanh, true}};
  const std::vector<nn::LayerSpec> mean = {{latent_dim, nn::Activation::kIdentity, false}};
  const std::vector<nn::LayerSpec> var = {{latent_dim, nn::Activation::kSoftplus, false}};
  const std::vector<nn::LayerSpec> decoder = {{hidden, nn::Activation::kTanh, true},
                                              {ambient_dim, nn::Activation::kSigmoid, false}};
  models::VaeModel vae(nn::DenseNet(ambient_dim, trunk, rng), nn::DenseNet(hidden, mean, rng),
                       nn::DenseNet(hidden, var, rng), nn::DenseNet(latent_dim, decoder, rng));
  // Give the decoder some curvature beyond the default initialization.
  for (auto& layer : vae.mutable_decoder_mean().mutable_layers()) layer.weight *= 2.5;
  Eigen::MatrixXd c(latent_dim, centers), w(ambient_dim, centers);
  for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = rng.Normal(0.0, center_spread);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = weight * rng.Uniform(0.5, 1.5);
  vae.set_variance(models::RbfVariance(c, w, bandwidth, 1e-6));
  return vae;
}

// Random classifier with a tanh (optionally batch-normalized) representation.
inline models::ClassifierModel ToyClassifier(std::uint64_t seed, int input_dim = 4,
                                             int representation_dim = 5) {
  Rng rng(seed);
  const std::vector<nn::LayerSpec> specs = {{6, nn::Activation::kTanh, true},
                                            {representation_dim, nn::Activation::kTanh, true}};
  nn::DenseNet net(input_dim, specs, rng);
  for (auto& layer : net.mutable_layers()) layer.weight *= 2.0;
  Eigen::VectorXd w(representation_dim);
  for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = rng.Normal(0.0, 1.5);
  return models::ClassifierModel(std::move(net), w, rng.Normal(0.0, 0.3));
}

// Classifier whose representation is the identity map (so M_X = I).
inline models::ClassifierModel IdentityClassifier(int dim, const Eigen::VectorXd& weights,
                                                  double bias = 0.0) {
  std::vector<nn::DenseLayer> layers(1);
  layers[0].weight = Eigen::MatrixXd::Identity(dim, dim);
  layers[0].bias = Eigen::VectorXd::Zero(dim);
  return models::ClassifierModel(nn::DenseNet(std::move(layers)), weights, bias);
}

// Linear classifier representation h(x) = B x.
inline models::ClassifierModel LinearClassifier(const Eigen::MatrixXd& b,
                                                const Eigen::VectorXd& weights) {
  std::vector<nn::DenseLayer> layers(1);
  layers[0].weight = b;
  layers[0].bias = Eigen::VectorXd::Zero(b.rows());
  return models::ClassifierModel(nn::DenseNet(std::move(layers)), weights, 0.0);
}

// VAE with linear decoder mu(z) = A z and constant sigma (zero RBF weights).
inline models::VaeModel LinearVae(const Eigen::MatrixXd& a) {
  const Eigen::Index ambient = a.rows(), latent = a.cols();
  auto linear = [](Eigen::MatrixXd weight, nn::Activation act) {
    std::vector<nn::DenseLayer> layers(1);
    layers[0].bias = Eigen::VectorXd::Zero(weight.rows());
    layers[0].weight = std::move(weight);
    layers[0].activation = act;
    return nn::DenseNet(std::move(layers));
  };
  const Eigen::MatrixXd pinv = a.completeOrthogonalDecomposition().pseudoInverse();
  models::VaeModel vae(nn::DenseNet(), linear(pinv, nn::Activation::kIdentity),
                       linear(Eigen::MatrixXd::Zero(latent, ambient), nn::Activation::kSoftplus),
                       linear(a, nn::Activation::kIdentity));
  vae.set_variance(models::RbfVariance(Eigen::MatrixXd::Zero(latent, 1),
                                       Eigen::MatrixXd::Zero(ambient, 1), 1.0, 1e-2));
  return vae;
}

}  // namespace riemce::testing

#endif  // RIEMCE_TESTS_TOY_MODELS_H_
