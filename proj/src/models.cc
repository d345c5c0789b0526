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

#include "riemce/models.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>

#include "riemce/errors.h"
#include "riemce/rng.h"

namespace riemce::models {
namespace {

std::vector<Eigen::Index> ShuffledOrder(Eigen::Index n, Rng& rng) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  for (std::size_t i = order.size(); i-- > 1;)
    std::swap(order[i], order[rng.UniformIndex(i + 1)]);
  return order;
}

Eigen::MatrixXd GatherColumns(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& order,
                              std::size_t begin, std::size_t end) {
  Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(end - begin));
  for (std::size_t i = begin; i < end; ++i)
    out.col(static_cast<Eigen::Index>(i - begin)) = m.col(order[i]);
  return out;
}

double BinaryCrossEntropy(double p, int y) {
  constexpr double kTiny = 1e-12;
  return y == 1 ? -std::log(std::max(p, kTiny)) : -std::log(std::max(1.0 - p, kTiny));
}

std::vector<std::span<double>> Concat(std::initializer_list<nn::DenseNet*> nets) {
  std::vector<std::span<double>> out;
  for (nn::DenseNet* net : nets) {
    auto p = net->Parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

void Append(nn::Gradients& into, nn::Gradients&& from) {
  for (auto& g : from) into.push_back(std::move(g));
}

}  // namespace

double TrainingLog::Value(std::size_t row, const std::string& column) const {
  auto it = std::find(columns.begin(), columns.end(), column);
  if (it == columns.end()) throw ConfigError("log has no column '" + column + "'");
  return rows.at(row).at(static_cast<std::size_t>(it - columns.begin()));
}

void TrainingLog::WriteCsv(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << columns[i];
  out << "\n" << std::setprecision(10);
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << "\n";
  }
}

// ---------------------------------------------------------------------------

ClassifierModel::ClassifierModel(nn::DenseNet representation, Eigen::VectorXd weights,
                                 double bias)
    : representation_(std::move(representation)), weights_(std::move(weights)), bias_(bias) {
  if (weights_.size() != representation_.output_dim())
    throw ShapeError("classifier head width " + std::to_string(weights_.size()) +
                     " != representation dim " +
                     std::to_string(representation_.output_dim()));
}

double ClassifierModel::Logit(const Eigen::VectorXd& x) const {
  return weights_.dot(representation_.Forward(x)) + bias_;
}

double ClassifierModel::Classify(const Eigen::VectorXd& x) const {
  return nn::Sigmoid(Logit(x));
}

Eigen::VectorXd ClassifierModel::Representation(const Eigen::VectorXd& x) const {
  return representation_.Forward(x);
}

Eigen::MatrixXd ClassifierModel::RepresentationJacobian(const Eigen::VectorXd& x,
                                                        Eigen::VectorXd* representation) const {
  return representation_.Jacobian(x, representation);
}

Eigen::VectorXd ClassifierModel::ClassifyRows(const Eigen::MatrixXd& rows) const {
  const Eigen::MatrixXd h = representation_.ForwardBatch(rows.transpose());
  Eigen::VectorXd logits = (weights_.transpose() * h).transpose();
  return logits.unaryExpr([this](double v) { return nn::Sigmoid(v + bias_); });
}

Archive ClassifierModel::ToArchive() const {
  Archive archive;
  archive.meta()["kind"] = "classifier";
  archive.meta()["train_balanced_accuracy"] = train_balanced_accuracy;
  archive.meta()["test_balanced_accuracy"] = test_balanced_accuracy;
  archive.PutNet("representation", representation_);
  archive.PutMatrix("head/weights", weights_);
  archive.PutScalar("head/bias", bias_);
  return archive;
}

ClassifierModel ClassifierModel::FromArchive(const Archive& archive) {
  if (archive.meta().value("kind", "") != "classifier")
    throw SchemaError("checkpoint is not a classifier");
  ClassifierModel model(archive.GetNet("representation"), archive.GetVector("head/weights"),
                        archive.GetScalar("head/bias"));
  model.train_balanced_accuracy = archive.meta().value("train_balanced_accuracy", 0.0);
  model.test_balanced_accuracy = archive.meta().value("test_balanced_accuracy", 0.0);
  return model;
}

double BalancedAccuracy(const ClassifierModel& model, const data::TabularDataset& dataset) {
  const Eigen::VectorXd p = model.ClassifyRows(dataset.features);
  double tp = 0, pos = 0, tn = 0, neg = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const bool predicted = p(i) >= 0.5;
    if (dataset.labels(i) == 1) {
      ++pos;
      tp += predicted;
    } else {
      ++neg;
      tn += !predicted;
    }
  }
  const double tpr = pos > 0 ? tp / pos : 0.0;
  const double tnr = neg > 0 ? tn / neg : 0.0;
  return 0.5 * (tpr + tnr);
}

ClassifierModel TrainClassifier(const data::TabularDataset& train,
                                const data::TabularDataset* test,
                                const ClassifierConfig& config, TrainingLog* log) {
  if (train.size() == 0) throw ConfigError("empty training set");
  const Eigen::Index positives = train.labels.sum();
  if (positives == 0 || positives == train.size())
    throw ConfigError("classifier training data contains a single class");
  if (config.representation_dim <= 0 || config.epochs < 0 || config.batch_size <= 0)
    throw ConfigError("invalid classifier configuration");

  const Eigen::Index h = config.representation_dim;
  const std::vector<nn::LayerSpec> specs = {
      {2 * h, nn::Activation::kTanh, config.batchnorm},
      {2 * h, nn::Activation::kTanh, config.batchnorm},
      {h, nn::Activation::kTanh, config.batchnorm},
      {h, nn::Activation::kTanh, config.batchnorm},
      {1, nn::Activation::kIdentity, false},
  };
  Rng root(config.seed);
  Rng init_rng = root.Derive("classifier/init");
  Rng batch_rng = root.Derive("classifier/batches");
  nn::DenseNet net(train.dim(), specs, init_rng);
  nn::Optimizer optimizer({.kind = config.optimizer,
                           .learning_rate = config.learning_rate,
                           .l2 = config.l2});

  const Eigen::MatrixXd x = train.features.transpose();
  const Eigen::VectorXd y = train.labels.cast<double>();
  if (log) log->columns = {"epoch", "loss", "train_balanced_accuracy", "test_balanced_accuracy"};

  auto split_model = [&](const nn::DenseNet& full) {
    std::vector<nn::DenseLayer> layers(full.layers().begin(), full.layers().end() - 1);
    const nn::DenseLayer& head = full.layers().back();
    return ClassifierModel(nn::DenseNet(std::move(layers)), head.weight.row(0).transpose(),
                           head.bias(0));
  };

  const auto n = static_cast<std::size_t>(train.size());
  const auto batch = static_cast<std::size_t>(config.batch_size);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto order = ShuffledOrder(train.size(), batch_rng);
    double loss = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(n, start + batch);
      const Eigen::MatrixXd xb = GatherColumns(x, order, start, end);
      nn::TrainingPass pass(net);
      const Eigen::MatrixXd logits = pass.Forward(xb);
      const double count = static_cast<double>(end - start);
      Eigen::MatrixXd upstream(1, xb.cols());
      for (Eigen::Index i = 0; i < xb.cols(); ++i) {
        const double p = nn::Sigmoid(logits(0, i));
        const int label = static_cast<int>(y(order[start + static_cast<std::size_t>(i)]));
        upstream(0, i) = (p - label) / count;
        loss += BinaryCrossEntropy(p, label);
      }
      optimizer.Step(net.Parameters(), pass.Backward(upstream));
    }
    if (log) {
      const ClassifierModel snapshot = split_model(net);
      log->Add({static_cast<double>(epoch), loss / static_cast<double>(n),
                BalancedAccuracy(snapshot, train),
                test ? BalancedAccuracy(snapshot, *test) : std::nan("")});
    }
  }
  ClassifierModel model = split_model(net);
  model.train_balanced_accuracy = BalancedAccuracy(model, train);
  if (test) model.test_balanced_accuracy = BalancedAccuracy(model, *test);
  return model;
}

// ---------------------------------------------------------------------------

RbfVariance::RbfVariance(Eigen::MatrixXd centers, Eigen::MatrixXd weights, double bandwidth,
                         double floor)
    : centers_(std::move(centers)),
      weights_(std::move(weights)),
      bandwidth_(bandwidth),
      floor_(floor) {
  if (weights_.cols() != centers_.cols())
    throw ShapeError("RBF weights have " + std::to_string(weights_.cols()) +
                     " columns for " + std::to_string(centers_.cols()) + " centers");
  if (!(bandwidth_ > 0)) throw ConfigError("RBF bandwidth must be positive");
  if (!(floor_ > 0)) throw ConfigError("RBF floor must be positive");
  if ((weights_.array() < 0).any()) throw ConfigError("RBF weights must be non-negative");
}

Eigen::VectorXd RbfVariance::Kernel(const Eigen::VectorXd& z) const {
  if (z.size() != latent_dim())
    throw ShapeError("latent point has dim " + std::to_string(z.size()) + ", expected " +
                     std::to_string(latent_dim()));
  const double scale = -0.5 / (bandwidth_ * bandwidth_);
  return ((centers_.colwise() - z).colwise().squaredNorm().transpose() * scale)
      .array()
      .exp()
      .matrix();
}

Eigen::VectorXd RbfVariance::Gamma(const Eigen::VectorXd& z) const {
  return (weights_ * Kernel(z)).array() + floor_;
}

Eigen::VectorXd RbfVariance::Sigma(const Eigen::VectorXd& z) const {
  return Gamma(z).array().rsqrt().matrix();
}

Eigen::MatrixXd RbfVariance::SigmaJacobian(const Eigen::VectorXd& z,
                                           Eigen::VectorXd* sigma) const {
  const Eigen::VectorXd phi = Kernel(z);
  const Eigen::VectorXd gamma = (weights_ * phi).array() + floor_;
  // d phi_k / d z = -phi_k (z - c_k) / l^2, so
  // d gamma / d z = -(1 / l^2) W diag(phi) (z 1^T - C)^T.
  const Eigen::MatrixXd diff = (-centers_).colwise() + z;  // d x K, columns z - c_k
  const Eigen::MatrixXd d_gamma =
      -(weights_ * phi.asDiagonal() * diff.transpose()) / (bandwidth_ * bandwidth_);
  // d sigma / d gamma = -0.5 gamma^(-3/2).
  const Eigen::VectorXd slope = -0.5 * gamma.array().pow(-1.5);
  if (sigma) *sigma = gamma.array().rsqrt().matrix();
  return slope.asDiagonal() * d_gamma;
}

// ---------------------------------------------------------------------------

VaeModel::VaeModel(nn::DenseNet encoder_trunk, nn::DenseNet encoder_mean,
                   nn::DenseNet encoder_variance, nn::DenseNet decoder_mean)
    : encoder_trunk_(std::move(encoder_trunk)),
      encoder_mean_(std::move(encoder_mean)),
      encoder_variance_(std::move(encoder_variance)),
      decoder_mean_(std::move(decoder_mean)) {
  const Eigen::Index trunk_out =
      encoder_trunk_.empty() ? decoder_mean_.output_dim() : encoder_trunk_.output_dim();
  if (encoder_mean_.input_dim() != trunk_out || encoder_variance_.input_dim() != trunk_out)
    throw ShapeError("encoder heads do not match trunk width");
  if (encoder_mean_.output_dim() != decoder_mean_.input_dim() ||
      encoder_variance_.output_dim() != decoder_mean_.input_dim())
    throw ShapeError("encoder output does not match decoder latent dim");
}

Eigen::VectorXd VaeModel::Encode(const Eigen::VectorXd& x) const {
  if (x.size() != ambient_dim())
    throw ShapeError("input has dim " + std::to_string(x.size()) + ", expected " +
                     std::to_string(ambient_dim()));
  return encoder_mean_.Forward(encoder_trunk_.empty() ? x : encoder_trunk_.Forward(x));
}

Eigen::VectorXd VaeModel::EncoderVariance(const Eigen::VectorXd& x) const {
  if (x.size() != ambient_dim()) throw ShapeError("input dim mismatch");
  return encoder_variance_.Forward(encoder_trunk_.empty() ? x : encoder_trunk_.Forward(x));
}

Eigen::MatrixXd VaeModel::EncodeRows(const Eigen::MatrixXd& rows) const {
  if (rows.cols() != ambient_dim()) throw ShapeError("input dim mismatch");
  const Eigen::MatrixXd x = rows.transpose();
  const Eigen::MatrixXd trunk = encoder_trunk_.empty() ? x : encoder_trunk_.ForwardBatch(x);
  return encoder_mean_.ForwardBatch(trunk).transpose();
}

Eigen::VectorXd VaeModel::DecodeMean(const Eigen::VectorXd& z) const {
  return decoder_mean_.Forward(z);
}

Eigen::MatrixXd VaeModel::DecodeMeanRows(const Eigen::MatrixXd& latent_rows) const {
  return decoder_mean_.ForwardBatch(latent_rows.transpose()).transpose();
}

Eigen::MatrixXd VaeModel::DecoderMeanJacobian(const Eigen::VectorXd& z,
                                              Eigen::VectorXd* mean) const {
  return decoder_mean_.Jacobian(z, mean);
}

const RbfVariance& VaeModel::variance() const {
  if (!variance_) throw StateError("decoder variance has not been fitted");
  return *variance_;
}

void VaeModel::set_variance(RbfVariance variance) {
  if (variance.latent_dim() != latent_dim() || variance.ambient_dim() != ambient_dim())
    throw ShapeError("RBF variance dimensions do not match the VAE");
  variance_ = std::move(variance);
}

Eigen::VectorXd VaeModel::DecoderSigma(const Eigen::VectorXd& z) const {
  return variance().Sigma(z);
}

Eigen::MatrixXd VaeModel::DecoderSigmaJacobian(const Eigen::VectorXd& z,
                                               Eigen::VectorXd* sigma) const {
  return variance().SigmaJacobian(z, sigma);
}

Archive VaeModel::ToArchive() const {
  Archive archive;
  archive.meta()["kind"] = "vae";
  archive.meta()["latent_dim"] = latent_dim();
  archive.meta()["ambient_dim"] = ambient_dim();
  archive.meta()["warmup_reconstruction_mse"] = warmup_reconstruction_mse;
  archive.PutNet("encoder_trunk", encoder_trunk_);
  archive.PutNet("encoder_mean", encoder_mean_);
  archive.PutNet("encoder_variance", encoder_variance_);
  archive.PutNet("decoder_mean", decoder_mean_);
  archive.meta()["has_variance"] = variance_.has_value();
  if (variance_) {
    archive.PutMatrix("rbf/centers", variance_->centers());
    archive.PutMatrix("rbf/weights", variance_->weights());
    archive.PutScalar("rbf/bandwidth", variance_->bandwidth());
    archive.PutScalar("rbf/floor", variance_->floor());
  }
  return archive;
}

VaeModel VaeModel::FromArchive(const Archive& archive) {
  if (archive.meta().value("kind", "") != "vae") throw SchemaError("checkpoint is not a VAE");
  VaeModel model(archive.GetNet("encoder_trunk"), archive.GetNet("encoder_mean"),
                 archive.GetNet("encoder_variance"), archive.GetNet("decoder_mean"));
  model.warmup_reconstruction_mse = archive.meta().value("warmup_reconstruction_mse", 0.0);
  if (archive.meta().value("has_variance", false))
    model.set_variance(RbfVariance(archive.GetMatrix("rbf/centers"),
                                   archive.GetMatrix("rbf/weights"),
                                   archive.GetScalar("rbf/bandwidth"),
                                   archive.GetScalar("rbf/floor")));
  return model;
}

VaeModel TrainVaeWarmup(const data::TabularDataset& train, const VaeConfig& config,
                        TrainingLog* log) {
  const Eigen::Index d = config.latent_dim;
  const Eigen::Index ambient = train.dim();
  if (d <= 0 || d >= ambient)
    throw ConfigError("latent dim " + std::to_string(d) + " must be in [1, D=" +
                      std::to_string(ambient) + ")");
  if (train.size() == 0) throw ConfigError("empty training set");
  if (config.epochs < 0 || config.batch_size <= 0 || config.beta < 0)
    throw ConfigError("invalid VAE configuration");

  Rng root(config.seed);
  Rng init_rng = root.Derive("vae/init");
  Rng batch_rng = root.Derive("vae/batches");
  Rng noise_rng = root.Derive("vae/noise");

  std::vector<nn::LayerSpec> trunk_specs, decoder_specs;
  for (int width : config.hidden)
    trunk_specs.push_back({width, config.hidden_activation, config.batchnorm});
  for (auto it = config.hidden.rbegin(); it != config.hidden.rend(); ++it)
    decoder_specs.push_back({*it, config.hidden_activation, config.batchnorm});
  decoder_specs.push_back({ambient, config.output_activation, false});
  const Eigen::Index trunk_width = config.hidden.empty() ? ambient : config.hidden.back();
  const std::vector<nn::LayerSpec> mean_spec = {{d, nn::Activation::kIdentity, false}};
  const std::vector<nn::LayerSpec> var_spec = {{d, nn::Activation::kSoftplus, false}};

  nn::DenseNet trunk = trunk_specs.empty() ? nn::DenseNet()
                                           : nn::DenseNet(ambient, trunk_specs, init_rng);
  nn::DenseNet mean_head(trunk_width, mean_spec, init_rng);
  nn::DenseNet var_head(trunk_width, var_spec, init_rng);
  nn::DenseNet decoder(d, decoder_specs, init_rng);

  nn::Optimizer optimizer({.kind = nn::OptimizerKind::kAdam,
                           .learning_rate = config.learning_rate});
  constexpr double kMinVariance = 1e-8;

  const Eigen::MatrixXd x = train.features.transpose();
  const auto n = static_cast<std::size_t>(train.size());
  const auto batch = static_cast<std::size_t>(config.batch_size);
  if (log) log->columns = {"epoch", "loss", "reconstruction", "kl"};

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto order = ShuffledOrder(train.size(), batch_rng);
    double total_recon = 0.0, total_kl = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(n, start + batch);
      const Eigen::MatrixXd xb = GatherColumns(x, order, start, end);
      const double count = static_cast<double>(xb.cols());

      nn::TrainingPass trunk_pass(trunk), mean_pass(mean_head), var_pass(var_head),
          decoder_pass(decoder);
      const Eigen::MatrixXd features = trunk.empty() ? xb : trunk_pass.Forward(xb);
      const Eigen::MatrixXd mean = mean_pass.Forward(features);
      const Eigen::MatrixXd variance = var_pass.Forward(features).array() + kMinVariance;
      Eigen::MatrixXd eps = Eigen::MatrixXd::Zero(d, xb.cols());
      if (config.sample_latent)
        for (Eigen::Index c = 0; c < eps.cols(); ++c)
          for (Eigen::Index r = 0; r < d; ++r) eps(r, c) = noise_rng.Normal();
      const Eigen::MatrixXd stddev = variance.array().sqrt();
      const Eigen::MatrixXd z = mean + (stddev.array() * eps.array()).matrix();
      const Eigen::MatrixXd recon = decoder_pass.Forward(z);

      const Eigen::MatrixXd residual = recon - xb;
      total_recon += 0.5 * residual.squaredNorm();
      total_kl += 0.5 * (variance.array() + mean.array().square() - 1.0 -
                         variance.array().log())
                            .sum();

      Eigen::MatrixXd d_z;
      nn::Gradients grads = decoder_pass.Backward(residual / count, &d_z);
      const Eigen::MatrixXd d_mean = d_z + (config.beta / count) * mean;
      Eigen::MatrixXd d_var =
          (d_z.array() * eps.array() / (2.0 * stddev.array())).matrix() +
          ((config.beta / count) * 0.5 * (1.0 - variance.array().inverse())).matrix();
      if (!config.sample_latent)
        d_var = ((config.beta / count) * 0.5 * (1.0 - variance.array().inverse())).matrix();
      Eigen::MatrixXd d_features_mean, d_features_var;
      nn::Gradients mean_grads = mean_pass.Backward(d_mean, &d_features_mean);
      nn::Gradients var_grads = var_pass.Backward(d_var, &d_features_var);
      Append(grads, std::move(mean_grads));
      Append(grads, std::move(var_grads));
      if (!trunk.empty()) Append(grads, trunk_pass.Backward(d_features_mean + d_features_var));
      optimizer.Step(Concat({&decoder, &mean_head, &var_head, &trunk}), std::move(grads));
    }
    if (log)
      log->Add({static_cast<double>(epoch),
                (total_recon + config.beta * total_kl) / static_cast<double>(n),
                total_recon / static_cast<double>(n), total_kl / static_cast<double>(n)});
  }

  VaeModel model(std::move(trunk), std::move(mean_head), std::move(var_head),
                 std::move(decoder));
  const Eigen::MatrixXd reconstruction = model.DecodeMeanRows(model.EncodeRows(train.features));
  model.warmup_reconstruction_mse =
      (reconstruction - train.features).squaredNorm() /
      static_cast<double>(train.features.size());
  return model;
}

Eigen::MatrixXd KMeans(const Eigen::MatrixXd& points, int clusters, int iterations,
                       std::uint64_t seed) {
  const Eigen::Index n = points.rows();
  if (clusters <= 0 || clusters > n)
    throw ConfigError("k-means needs 1 <= K <= N, got K=" + std::to_string(clusters) +
                      ", N=" + std::to_string(n));
  Rng rng(DeriveSeed(seed, "kmeans"));
  const Eigen::MatrixXd pts = points.transpose();  // d x N
  Eigen::MatrixXd centers(pts.rows(), clusters);
  centers.col(0) = pts.col(static_cast<Eigen::Index>(rng.UniformIndex(static_cast<std::uint64_t>(n))));
  Eigen::VectorXd nearest = (pts.colwise() - centers.col(0)).colwise().squaredNorm().transpose();
  for (int k = 1; k < clusters; ++k) {
    const double total = nearest.sum();
    Eigen::Index pick = 0;
    if (total > 0) {
      double target = rng.Uniform() * total;
      for (pick = 0; pick < n - 1; ++pick) {
        target -= nearest(pick);
        if (target < 0) break;
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.UniformIndex(static_cast<std::uint64_t>(n)));
    }
    centers.col(k) = pts.col(pick);
    nearest = nearest.cwiseMin(
        (pts.colwise() - centers.col(k)).colwise().squaredNorm().transpose());
  }

  std::vector<Eigen::Index> assignment(static_cast<std::size_t>(n), -1);
  for (int it = 0; it < iterations; ++it) {
    bool changed = false;
    const Eigen::VectorXd center_norms = centers.colwise().squaredNorm().transpose();
    const Eigen::MatrixXd cross = centers.transpose() * pts;  // K x N
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index best = 0;
      (center_norms - 2.0 * cross.col(i)).minCoeff(&best);
      if (assignment[static_cast<std::size_t>(i)] != best) {
        assignment[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    if (!changed) break;
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(pts.rows(), clusters);
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(clusters);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.col(assignment[static_cast<std::size_t>(i)]) += pts.col(i);
      counts(assignment[static_cast<std::size_t>(i)]) += 1;
    }
    for (int k = 0; k < clusters; ++k)
      if (counts(k) > 0) centers.col(k) = sums.col(k) / counts(k);
  }
  return centers;
}

void FitDecoderVariance(VaeModel& vae, const data::TabularDataset& train,
                        const RbfConfig& config, TrainingLog* log) {
  if (config.centers > train.size())
    throw ConfigError("RBF centers (" + std::to_string(config.centers) +
                      ") exceed training samples (" + std::to_string(train.size()) + ")");
  if (config.centers <= 0 || !(config.bandwidth > 0) || !(config.floor > 0) ||
      config.epochs < 0 || config.batch_size <= 0)
    throw ConfigError("invalid RBF configuration");
  if (train.dim() != vae.ambient_dim()) throw ShapeError("dataset does not match the VAE");

  const Eigen::MatrixXd latent = vae.EncodeRows(train.features);  // N x d
  const Eigen::MatrixXd squared_residual =
      (train.features - vae.DecodeMeanRows(latent)).array().square();  // N x D
  const Eigen::MatrixXd centers =
      KMeans(latent, config.centers, config.kmeans_iterations, config.seed);

  // Kernel activations are fixed because the encoder is frozen. Stored with
  // samples as columns so minibatch gathers are contiguous.
  const double scale = -0.5 / (config.bandwidth * config.bandwidth);
  Eigen::MatrixXd kernel = -2.0 * centers.transpose() * latent.transpose();  // K x N
  kernel.colwise() += centers.colwise().squaredNorm().transpose();
  kernel.rowwise() += latent.rowwise().squaredNorm().transpose();
  kernel = (kernel.array().max(0.0) * scale).exp().matrix();
  const Eigen::MatrixXd residual_t = squared_residual.transpose();  // D x N

  // W = exp(log_weights); log-parameterization lets the precisions span
  // several orders of magnitude within the fixed epoch budget.
  const Eigen::Index ambient = train.dim();
  Eigen::MatrixXd log_weights = Eigen::MatrixXd::Zero(ambient, config.centers);
  std::vector<std::span<double>> params = {
      std::span<double>(log_weights.data(), static_cast<std::size_t>(log_weights.size()))};
  nn::Optimizer optimizer({.kind = nn::OptimizerKind::kAdam,
                           .learning_rate = config.learning_rate});
  Rng batch_rng(DeriveSeed(config.seed, "rbf/batches"));
  const auto n = static_cast<std::size_t>(train.size());
  const auto batch = static_cast<std::size_t>(config.batch_size);
  if (log) log->columns = {"epoch", "nll"};

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto order = ShuffledOrder(train.size(), batch_rng);
    double nll = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(n, start + batch);
      const Eigen::MatrixXd phi = GatherColumns(kernel, order, start, end);      // K x B
      const Eigen::MatrixXd r2 = GatherColumns(residual_t, order, start, end);   // D x B
      const Eigen::MatrixXd weights = log_weights.array().exp();
      const Eigen::MatrixXd gamma = (weights * phi).array() + config.floor;      // D x B
      // Per-coordinate Gaussian NLL in precision form (constants dropped):
      // -0.5 log gamma + 0.5 gamma r^2.
      nll += (-0.5 * gamma.array().log() + 0.5 * gamma.array() * r2.array()).sum();
      const Eigen::MatrixXd d_gamma = 0.5 * (r2.array() - gamma.array().inverse()).matrix() /
                                      static_cast<double>(phi.cols());
      const Eigen::MatrixXd d_log_weights = (d_gamma * phi.transpose()).cwiseProduct(weights);
      optimizer.Step(params, {Eigen::Map<const Eigen::VectorXd>(d_log_weights.data(),
                                                                 d_log_weights.size())});
    }
    if (log) log->Add({static_cast<double>(epoch), nll / static_cast<double>(n)});
  }
  vae.set_variance(
      RbfVariance(centers, log_weights.array().exp(), config.bandwidth, config.floor));
}

void SaveClassifier(const ClassifierModel& model, const std::filesystem::path& path) {
  model.ToArchive().Save(path);
}

ClassifierModel LoadClassifier(const std::filesystem::path& path) {
  return ClassifierModel::FromArchive(Archive::Load(path));
}

void SaveVae(const VaeModel& model, const std::filesystem::path& path) {
  model.ToArchive().Save(path);
}

VaeModel LoadVae(const std::filesystem::path& path) {
  return VaeModel::FromArchive(Archive::Load(path));
}

}  // namespace riemce::models
