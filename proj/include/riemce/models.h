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

#ifndef RIEMCE_MODELS_H_
#define RIEMCE_MODELS_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "riemce/checkpoint.h"
#include "riemce/data.h"
#include "riemce/nn.h"

namespace riemce::models {

// Per-epoch metrics table, written as CSV.
struct TrainingLog {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  void Add(std::vector<double> row) { rows.push_back(std::move(row)); }
  double Value(std::size_t row, const std::string& column) const;
  void WriteCsv(const std::filesystem::path& path) const;
};

// ---------------------------------------------------------------------------
// Classifier c(x) = sigmoid(w^T h(x) + b).

struct ClassifierConfig {
  int representation_dim = 24;  // H; hidden widths are 2H, 2H, H, H
  bool batchnorm = true;
  double learning_rate = 1e-5;
  double l2 = 0.05;
  int epochs = 20;
  int batch_size = 1024;
  nn::OptimizerKind optimizer = nn::OptimizerKind::kRmsprop;
  std::uint64_t seed = 0;
};

class ClassifierModel {
 public:
  ClassifierModel() = default;
  ClassifierModel(nn::DenseNet representation, Eigen::VectorXd weights, double bias);

  double Logit(const Eigen::VectorXd& x) const;
  double Classify(const Eigen::VectorXd& x) const;
  Eigen::VectorXd Representation(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd RepresentationJacobian(const Eigen::VectorXd& x,
                                         Eigen::VectorXd* representation = nullptr) const;
  // Probabilities for every row of an N x D matrix.
  Eigen::VectorXd ClassifyRows(const Eigen::MatrixXd& rows) const;

  Eigen::Index input_dim() const { return representation_.input_dim(); }
  Eigen::Index representation_dim() const { return representation_.output_dim(); }
  const nn::DenseNet& representation_net() const { return representation_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  double bias() const { return bias_; }

  double train_balanced_accuracy = 0.0;
  double test_balanced_accuracy = 0.0;

  Archive ToArchive() const;
  static ClassifierModel FromArchive(const Archive& archive);

 private:
  nn::DenseNet representation_;
  Eigen::VectorXd weights_;
  double bias_ = 0.0;
};

// Mean of per-class recalls at threshold 0.5.
double BalancedAccuracy(const ClassifierModel& model, const data::TabularDataset& dataset);

// Trains with binary cross-entropy. `test` (optional) is only evaluated for
// the log. Throws ConfigError for single-class training data.
ClassifierModel TrainClassifier(const data::TabularDataset& train,
                                const data::TabularDataset* test,
                                const ClassifierConfig& config,
                                TrainingLog* log = nullptr);

// ---------------------------------------------------------------------------
// Decoder variance: gamma_j(z) = sum_k W_jk exp(-|z - c_k|^2 / (2 l^2)) + floor,
// sigma(z) = gamma(z)^(-1/2).

class RbfVariance {
 public:
  RbfVariance() = default;
  // centers: d x K, weights: D x K (non-negative).
  RbfVariance(Eigen::MatrixXd centers, Eigen::MatrixXd weights, double bandwidth,
              double floor);

  Eigen::VectorXd Kernel(const Eigen::VectorXd& z) const;
  Eigen::VectorXd Gamma(const Eigen::VectorXd& z) const;
  Eigen::VectorXd Sigma(const Eigen::VectorXd& z) const;
  // d sigma / d z, D x d.
  Eigen::MatrixXd SigmaJacobian(const Eigen::VectorXd& z,
                                Eigen::VectorXd* sigma = nullptr) const;

  double max_sigma() const { return 1.0 / std::sqrt(floor_); }
  const Eigen::MatrixXd& centers() const { return centers_; }
  const Eigen::MatrixXd& weights() const { return weights_; }
  double bandwidth() const { return bandwidth_; }
  double floor() const { return floor_; }
  Eigen::Index latent_dim() const { return centers_.rows(); }
  Eigen::Index ambient_dim() const { return weights_.rows(); }

 private:
  Eigen::MatrixXd centers_;
  Eigen::MatrixXd weights_;
  double bandwidth_ = 1.0;
  double floor_ = 1e-6;
};

struct VaeConfig {
  int latent_dim = 5;
  std::vector<int> hidden = {512, 256};
  nn::Activation hidden_activation = nn::Activation::kTanh;
  nn::Activation output_activation = nn::Activation::kSigmoid;
  bool batchnorm = true;
  double beta = 1e-4;
  int epochs = 100;
  double learning_rate = 1e-3;
  int batch_size = 512;
  // Deterministic warm-up feeds the posterior mean to the decoder; true
  // switches to reparameterized sampling.
  bool sample_latent = false;
  std::uint64_t seed = 0;
};

struct RbfConfig {
  int centers = 200;
  double bandwidth = 0.01;
  double floor = 1e-6;
  int epochs = 300;
  double learning_rate = 1e-3;
  int batch_size = 512;
  int kmeans_iterations = 100;
  std::uint64_t seed = 0;
};

class VaeModel {
 public:
  VaeModel() = default;
  VaeModel(nn::DenseNet encoder_trunk, nn::DenseNet encoder_mean,
           nn::DenseNet encoder_variance, nn::DenseNet decoder_mean);

  Eigen::VectorXd Encode(const Eigen::VectorXd& x) const;
  Eigen::VectorXd EncoderVariance(const Eigen::VectorXd& x) const;
  // Posterior means for every row of an N x D matrix, returned as N x d.
  Eigen::MatrixXd EncodeRows(const Eigen::MatrixXd& rows) const;

  Eigen::VectorXd DecodeMean(const Eigen::VectorXd& z) const;
  Eigen::MatrixXd DecodeMeanRows(const Eigen::MatrixXd& latent_rows) const;
  Eigen::MatrixXd DecoderMeanJacobian(const Eigen::VectorXd& z,
                                      Eigen::VectorXd* mean = nullptr) const;

  // Require a fitted variance; throw StateError otherwise.
  Eigen::VectorXd DecoderSigma(const Eigen::VectorXd& z) const;
  Eigen::MatrixXd DecoderSigmaJacobian(const Eigen::VectorXd& z,
                                       Eigen::VectorXd* sigma = nullptr) const;

  bool has_variance() const { return variance_.has_value(); }
  const RbfVariance& variance() const;
  void set_variance(RbfVariance variance);

  Eigen::Index latent_dim() const { return decoder_mean_.input_dim(); }
  Eigen::Index ambient_dim() const { return decoder_mean_.output_dim(); }

  const nn::DenseNet& encoder_trunk() const { return encoder_trunk_; }
  const nn::DenseNet& encoder_mean() const { return encoder_mean_; }
  const nn::DenseNet& encoder_variance() const { return encoder_variance_; }
  const nn::DenseNet& decoder_mean() const { return decoder_mean_; }
  nn::DenseNet& mutable_encoder_trunk() { return encoder_trunk_; }
  nn::DenseNet& mutable_encoder_mean() { return encoder_mean_; }
  nn::DenseNet& mutable_encoder_variance() { return encoder_variance_; }
  nn::DenseNet& mutable_decoder_mean() { return decoder_mean_; }

  // Mean per-coordinate squared reconstruction error on the training data at
  // the end of warm-up.
  double warmup_reconstruction_mse = 0.0;

  Archive ToArchive() const;
  static VaeModel FromArchive(const Archive& archive);

 private:
  nn::DenseNet encoder_trunk_;
  nn::DenseNet encoder_mean_;
  nn::DenseNet encoder_variance_;
  nn::DenseNet decoder_mean_;
  std::optional<RbfVariance> variance_;
};

// Stage 1: encoder and decoder mean, Gaussian unit-variance reconstruction
// plus beta * KL. Throws ConfigError when latent_dim >= D.
VaeModel TrainVaeWarmup(const data::TabularDataset& train, const VaeConfig& config,
                        TrainingLog* log = nullptr);

// Stage 2: k-means centers on training latent means, non-negative weights
// (log-parameterized) fitted by Gaussian log-likelihood of the frozen
// reconstructions. Encoder and decoder mean are not modified. Throws
// ConfigError when centers > N.
void FitDecoderVariance(VaeModel& vae, const data::TabularDataset& train,
                        const RbfConfig& config, TrainingLog* log = nullptr);

// Seeded k-means++ / Lloyd. points: N x d rows. Returns d x K centers.
Eigen::MatrixXd KMeans(const Eigen::MatrixXd& points, int clusters, int iterations,
                       std::uint64_t seed);

void SaveClassifier(const ClassifierModel& model, const std::filesystem::path& path);
ClassifierModel LoadClassifier(const std::filesystem::path& path);
void SaveVae(const VaeModel& model, const std::filesystem::path& path);
VaeModel LoadVae(const std::filesystem::path& path);

}  // namespace riemce::models

#endif  // RIEMCE_MODELS_H_
