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

#include "riemce/counterfactual.h"

#include <cmath>
#include <fstream>

#include "riemce/checkpoint.h"
#include "riemce/errors.h"
#include "riemce/geometry.h"
#include "riemce/parallel.h"

namespace riemce::counterfactual {
namespace {

double SoftplusStable(double v) {
  return v > 0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
}

// Everything one optimizer step needs at the current latent point.
struct PointEvaluation {
  CeLossResult loss;
  Eigen::MatrixXd mean_jac;            // D x d
  Eigen::MatrixXd representation_jac;  // H x D, at mu(z)
};

PointEvaluation Evaluate(const models::VaeModel& vae, const models::ClassifierModel& clf,
                         const Eigen::VectorXd& z, const Eigen::VectorXd& factual, int target,
                         double alpha) {
  PointEvaluation out;
  out.mean_jac = vae.DecoderMeanJacobian(z, &out.loss.x_hat);
  Eigen::VectorXd h;
  out.representation_jac = clf.RepresentationJacobian(out.loss.x_hat, &h);
  const double logit = clf.weights().dot(h) + clf.bias();
  const double c = nn::Sigmoid(logit);
  // BCE(sigmoid(logit), y) = softplus(logit) - y * logit.
  out.loss.loss = SoftplusStable(logit) - target * logit;
  Eigen::VectorXd grad_x = (c - target) * (out.representation_jac.transpose() * clf.weights());
  if (alpha > 0) {
    const Eigen::VectorXd diff = out.loss.x_hat - factual;
    const double dist = diff.norm();
    out.loss.loss += alpha * dist;
    if (dist > 0) grad_x += (alpha / dist) * diff;
  }
  out.loss.gradient = out.mean_jac.transpose() * grad_x;
  out.loss.confidence = target == 1 ? c : 1.0 - c;
  if (!std::isfinite(out.loss.loss) || !out.loss.gradient.allFinite())
    throw NumericError("non-finite counterfactual loss or gradient");
  return out;
}

}  // namespace

std::string OptimizerName(Optimizer optimizer) {
  switch (optimizer) {
    case Optimizer::kSgd: return "sgd";
    case Optimizer::kRsgd: return "rsgd";
    case Optimizer::kRsgdC: return "rsgd_c";
  }
  return "unknown";
}

Optimizer ParseOptimizer(const std::string& name) {
  if (name == "sgd") return Optimizer::kSgd;
  if (name == "rsgd") return Optimizer::kRsgd;
  if (name == "rsgd_c" || name == "rsgd-c") return Optimizer::kRsgdC;
  throw ConfigError("unknown optimizer '" + name + "' (expected sgd, rsgd or rsgd_c)");
}

void CeConfig::Validate() const {
  if (!(step_size > 0)) throw ConfigError("step size must be positive");
  if (iterations < 1) throw ConfigError("iterations must be at least 1");
  if (!(alpha >= 0)) throw ConfigError("alpha must be non-negative");
  if (target != 0 && target != 1) throw ConfigError("target must be 0 or 1");
}

CeLossResult CeLoss(const models::VaeModel& vae, const models::ClassifierModel& clf,
                    const Eigen::VectorXd& z, const Eigen::VectorXd& factual, int target,
                    double alpha) {
  if (clf.input_dim() != vae.ambient_dim())
    throw ConfigError("classifier input dim does not match the VAE ambient dim");
  if (factual.size() != vae.ambient_dim()) throw ShapeError("factual dim mismatch");
  return Evaluate(vae, clf, z, factual, target, alpha).loss;
}

void AssignFirstHits(CeTrajectory& trajectory, const std::vector<double>& thresholds) {
  trajectory.first_hits.clear();
  for (double tau : thresholds) {
    const auto hit = ExtractAtThreshold(trajectory, tau);
    trajectory.first_hits.push_back(hit ? std::optional<std::size_t>(hit->step) : std::nullopt);
  }
}

CeTrajectory GenerateCe(const models::VaeModel& vae, const models::ClassifierModel& clf,
                        const Eigen::VectorXd& factual, const CeConfig& config) {
  config.Validate();
  if (clf.input_dim() != vae.ambient_dim())
    throw ConfigError("classifier input dim does not match the VAE ambient dim");
  CeTrajectory trajectory;
  trajectory.factual = factual;
  trajectory.steps.reserve(static_cast<std::size_t>(config.iterations) + 1);

  Eigen::VectorXd z = vae.Encode(factual);
  for (int t = 0;; ++t) {
    PointEvaluation point = Evaluate(vae, clf, z, factual, config.target, config.alpha);
    trajectory.steps.push_back({z, point.loss.x_hat, point.loss.confidence, point.loss.loss,
                                point.loss.gradient.norm(), 0.0});
    if (t == config.iterations) break;

    Eigen::VectorXd direction;
    try {
      if (config.optimizer == Optimizer::kSgd) {
        direction = point.loss.gradient;
      } else {
        geometry::MetricTensor metric;
        if (config.force_identity_metric) {
          metric = geometry::EuclideanMetric(z);
        } else {
          const Eigen::MatrixXd sigma_jac = vae.DecoderSigmaJacobian(z);
          metric = config.optimizer == Optimizer::kRsgd
                       ? geometry::PullbackFromJacobians(z, point.mean_jac, sigma_jac)
                       : geometry::EnhancedFromJacobians(z, point.mean_jac, sigma_jac,
                                                         point.representation_jac);
        }
        trajectory.steps.back().jitter = metric.jitter;
        direction = geometry::RiemannianGradient(metric, point.loss.gradient);
      }
    } catch (const SingularMetricError& e) {
      trajectory.valid = false;
      trajectory.error = e.what();
      break;
    }
    const double norm = direction.norm();
    if (config.normalize) {
      if (norm > 0) z -= (config.step_size / norm) * direction;
    } else {
      z -= config.step_size * direction;
    }
    if (!z.allFinite()) throw NumericError("latent iterate became non-finite");
  }
  trajectory.counterfactual = trajectory.steps.back().x_hat;
  AssignFirstHits(trajectory, config.thresholds);
  return trajectory;
}

CeTrajectory Truncate(const CeTrajectory& trajectory, int iterations,
                      const std::vector<double>& thresholds) {
  if (iterations < 0) throw ConfigError("iterations must be non-negative");
  CeTrajectory out = trajectory;
  const auto keep = static_cast<std::size_t>(iterations) + 1;
  if (out.steps.size() > keep) {
    out.steps.resize(keep);
    out.steps.back().jitter = 0.0;
    out.counterfactual = out.steps.back().x_hat;
    out.valid = true;
    out.error.clear();
  }
  AssignFirstHits(out, thresholds);
  return out;
}

std::optional<ThresholdHit> ExtractAtThreshold(const CeTrajectory& trajectory, double tau) {
  for (std::size_t t = 1; t < trajectory.steps.size(); ++t)
    if (trajectory.steps[t].confidence >= tau) return ThresholdHit{trajectory.steps[t].x_hat, t};
  return std::nullopt;
}

std::vector<CeTrajectory> GenerateBatch(const models::VaeModel& vae,
                                        const models::ClassifierModel& clf,
                                        const Eigen::MatrixXd& factuals, const CeConfig& config,
                                        int parallelism) {
  config.Validate();
  if (parallelism < 1) throw ConfigError("parallelism must be at least 1");
  const auto n = static_cast<std::size_t>(factuals.rows());
  std::vector<CeTrajectory> out(n);
  ParallelFor(n, parallelism, [&](std::size_t i) {
    const Eigen::VectorXd x = factuals.row(static_cast<Eigen::Index>(i)).transpose();
    try {
      out[i] = GenerateCe(vae, clf, x, config);
    } catch (const std::exception& e) {
      out[i] = CeTrajectory{};
      out[i].factual = x;
      out[i].valid = false;
      out[i].error = e.what();
      out[i].first_hits.assign(config.thresholds.size(), std::nullopt);
    }
    out[i].index = i;
  });
  return out;
}

std::vector<Eigen::Index> CorrectNegatives(const models::ClassifierModel& clf,
                                           const Eigen::MatrixXd& features,
                                           const Eigen::VectorXi& labels) {
  const Eigen::VectorXd p = clf.ClassifyRows(features);
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < labels.size(); ++i)
    if (labels(i) == 0 && p(i) < 0.5) rows.push_back(i);
  return rows;
}

void WriteTrajectoriesJsonl(const std::filesystem::path& path,
                            const std::vector<CeTrajectory>& trajectories) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.begin(), v.end()); };
  for (const CeTrajectory& t : trajectories) {
    nlohmann::json record;
    record["index"] = t.index;
    record["factual"] = vec(t.factual);
    record["valid"] = t.valid;
    record["error"] = t.error;
    nlohmann::json steps = nlohmann::json::array();
    for (const CeStep& s : t.steps)
      steps.push_back({{"z", vec(s.z)},
                       {"x_hat", vec(s.x_hat)},
                       {"confidence", s.confidence},
                       {"loss", s.loss},
                       {"gradient_norm", s.gradient_norm},
                       {"jitter", s.jitter}});
    record["steps"] = std::move(steps);
    out << record.dump() << "\n";
  }
}

void SaveTrajectories(const std::filesystem::path& path,
                      const std::vector<CeTrajectory>& trajectories,
                      const nlohmann::json& meta) {
  Eigen::Index total = 0, latent = 0, ambient = 0;
  for (const CeTrajectory& t : trajectories) {
    total += static_cast<Eigen::Index>(t.steps.size());
    ambient = std::max(ambient, t.factual.size());
    if (!t.steps.empty()) latent = t.steps.front().z.size();
  }
  Eigen::MatrixXd factuals(static_cast<Eigen::Index>(trajectories.size()), ambient);
  Eigen::VectorXd lengths(static_cast<Eigen::Index>(trajectories.size()));
  Eigen::MatrixXd z(total, latent), x_hat(total, ambient), stats(total, 4);
  nlohmann::json flags = nlohmann::json::array();
  Eigen::Index row = 0;
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    const CeTrajectory& t = trajectories[i];
    const auto r = static_cast<Eigen::Index>(i);
    factuals.row(r) = t.factual.transpose();
    lengths(r) = static_cast<double>(t.steps.size());
    flags.push_back({{"index", t.index}, {"valid", t.valid}, {"error", t.error}});
    for (const CeStep& s : t.steps) {
      z.row(row) = s.z.transpose();
      x_hat.row(row) = s.x_hat.transpose();
      stats.row(row) << s.confidence, s.loss, s.gradient_norm, s.jitter;
      ++row;
    }
  }
  Archive archive;
  archive.meta() = meta;
  archive.meta()["kind"] = "trajectories";
  archive.meta()["trajectories"] = std::move(flags);
  archive.PutMatrix("factuals", factuals);
  archive.PutMatrix("lengths", lengths);
  archive.PutMatrix("z", z);
  archive.PutMatrix("x_hat", x_hat);
  archive.PutMatrix("stats", stats);
  archive.Save(path);
}

TrajectoryFile LoadTrajectories(const std::filesystem::path& path) {
  Archive archive = Archive::Load(path);
  if (archive.meta().value("kind", "") != "trajectories")
    throw SchemaError("'" + path.string() + "' is not a trajectory file");
  const Eigen::MatrixXd& factuals = archive.GetMatrix("factuals");
  const Eigen::VectorXd lengths = archive.GetVector("lengths");
  const Eigen::MatrixXd& z = archive.GetMatrix("z");
  const Eigen::MatrixXd& x_hat = archive.GetMatrix("x_hat");
  const Eigen::MatrixXd& stats = archive.GetMatrix("stats");
  const nlohmann::json& flags = archive.meta().at("trajectories");
  if (static_cast<Eigen::Index>(flags.size()) != factuals.rows() ||
      lengths.size() != factuals.rows() || lengths.sum() != static_cast<double>(z.rows()))
    throw SchemaError("inconsistent trajectory file '" + path.string() + "'");

  TrajectoryFile file;
  Eigen::Index row = 0;
  for (Eigen::Index i = 0; i < factuals.rows(); ++i) {
    CeTrajectory t;
    const nlohmann::json& f = flags[static_cast<std::size_t>(i)];
    t.index = f.at("index").get<std::size_t>();
    t.valid = f.at("valid").get<bool>();
    t.error = f.at("error").get<std::string>();
    t.factual = factuals.row(i).transpose();
    const auto length = static_cast<Eigen::Index>(lengths(i));
    for (Eigen::Index k = 0; k < length; ++k, ++row)
      t.steps.push_back({z.row(row).transpose(), x_hat.row(row).transpose(), stats(row, 0),
                         stats(row, 1), stats(row, 2), stats(row, 3)});
    if (!t.steps.empty()) t.counterfactual = t.steps.back().x_hat;
    file.trajectories.push_back(std::move(t));
  }
  archive.meta().erase("trajectories");
  archive.meta().erase("kind");
  file.meta = archive.meta();
  return file;
}

}  // namespace riemce::counterfactual
