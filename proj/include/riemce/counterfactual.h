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

#ifndef RIEMCE_COUNTERFACTUAL_H_
#define RIEMCE_COUNTERFACTUAL_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "riemce/models.h"

namespace riemce::counterfactual {

enum class Optimizer { kSgd, kRsgd, kRsgdC };

std::string OptimizerName(Optimizer optimizer);  // "sgd", "rsgd", "rsgd_c"
Optimizer ParseOptimizer(const std::string& name);

struct CeConfig {
  Optimizer optimizer = Optimizer::kSgd;
  double step_size = 0.1;
  int iterations = 100;
  double alpha = 0.0;  // weight of the ||mu(z) - x||_2 fidelity term
  int target = 1;
  std::vector<double> thresholds;
  // Divide every update direction by its norm (all optimizers).
  bool normalize = true;
  // Replace the Riemannian metric with the identity; for reduction checks.
  bool force_identity_metric = false;

  // Throws ConfigError on invalid values.
  void Validate() const;
};

struct CeStep {
  Eigen::VectorXd z;
  Eigen::VectorXd x_hat;  // mu(z)
  double confidence = 0.0;  // c(x_hat)
  double loss = 0.0;
  double gradient_norm = 0.0;  // Euclidean latent gradient at this point
  double jitter = 0.0;         // metric jitter used for the update from here
};

struct CeTrajectory {
  std::size_t index = 0;  // position in the batch
  Eigen::VectorXd factual;
  std::vector<CeStep> steps;  // iterations + 1 entries when complete
  Eigen::VectorXd counterfactual;  // x_hat of the last step
  bool valid = true;
  std::string error;
  // First step reaching each configured threshold (absent if never).
  std::vector<std::optional<std::size_t>> first_hits;
};

struct CeLossResult {
  double loss = 0.0;
  Eigen::VectorXd gradient;  // d loss / d z
  Eigen::VectorXd x_hat;
  double confidence = 0.0;
};

// BCE(c(mu(z)), y) + alpha * ||mu(z) - x||_2 with its exact latent gradient.
CeLossResult CeLoss(const models::VaeModel& vae, const models::ClassifierModel& clf,
                    const Eigen::VectorXd& z, const Eigen::VectorXd& factual, int target,
                    double alpha);

// Runs the configured optimizer from the encoder mean of `factual`. A
// singular metric ends the run early with valid = false; non-finite values
// throw NumericError.
CeTrajectory GenerateCe(const models::VaeModel& vae, const models::ClassifierModel& clf,
                        const Eigen::VectorXd& factual, const CeConfig& config);

struct ThresholdHit {
  Eigen::VectorXd counterfactual;
  std::size_t step = 0;
};

// First step t >= 1 with confidence >= tau.
std::optional<ThresholdHit> ExtractAtThreshold(const CeTrajectory& trajectory, double tau);

// One trajectory per row of `factuals` (N x D), in row order. Errors become
// flagged trajectories. Output does not depend on `parallelism`.
std::vector<CeTrajectory> GenerateBatch(const models::VaeModel& vae,
                                        const models::ClassifierModel& clf,
                                        const Eigen::MatrixXd& factuals, const CeConfig& config,
                                        int parallelism = 1);

// Indices of rows with label 0 that the classifier also puts below 0.5.
std::vector<Eigen::Index> CorrectNegatives(const models::ClassifierModel& clf,
                                           const Eigen::MatrixXd& features,
                                           const Eigen::VectorXi& labels);

// Recomputes first_hits for `thresholds`.
void AssignFirstHits(CeTrajectory& trajectory, const std::vector<double>& thresholds);

// The trajectory a run with `iterations` steps would have produced, given a
// longer run with otherwise identical settings.
CeTrajectory Truncate(const CeTrajectory& trajectory, int iterations,
                      const std::vector<double>& thresholds);

// One JSON object per line: {index, factual, valid, error, steps[{z, x_hat,
// confidence, loss, gradient_norm, jitter}]}.
void WriteTrajectoriesJsonl(const std::filesystem::path& path,
                            const std::vector<CeTrajectory>& trajectories);

// Binary trajectory store in the checkpoint container. `meta` is copied into
// the header (dataset, optimizer, iterations, ...).
void SaveTrajectories(const std::filesystem::path& path,
                      const std::vector<CeTrajectory>& trajectories, const nlohmann::json& meta);
struct TrajectoryFile {
  nlohmann::json meta;
  std::vector<CeTrajectory> trajectories;
};
TrajectoryFile LoadTrajectories(const std::filesystem::path& path);

}  // namespace riemce::counterfactual

#endif  // RIEMCE_COUNTERFACTUAL_H_
