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

#ifndef RIEMCE_PIPELINE_H_
#define RIEMCE_PIPELINE_H_

// End-to-end stages behind the command-line tool. Every artifact for one
// root seed lives under <out>/<dataset>/seed_<seed>/:
//
//   train.ds, test.ds            normalized split (reused once written)
//   classifier.ckpt, vae.ckpt    model checkpoints
//   *_log.csv                    training curves
//   ce/<cell>.traj               trajectories per grid cell
//
// Reports and curves pooled over seeds go to <out>/<dataset>/.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "riemce/config.h"
#include "riemce/counterfactual.h"
#include "riemce/data.h"
#include "riemce/eval.h"
#include "riemce/models.h"

namespace riemce::pipeline {

std::filesystem::path DatasetDir(const RunConfig& config);
std::filesystem::path SeedDir(const RunConfig& config, std::uint64_t seed);
// "rsgd_it100_a0.1"
std::string CellName(const std::string& optimizer, int iterations, double alpha);

struct Splits {
  data::TabularDataset train;
  data::TabularDataset test;
};

// Loads the split from the seed directory, or builds it from the raw data
// (or the surface generator) and writes it there.
Splits PrepareData(const RunConfig& config, std::uint64_t seed);

models::ClassifierModel TrainClassifierStage(const RunConfig& config, std::uint64_t seed);
models::VaeModel TrainVaeStage(const RunConfig& config, std::uint64_t seed);

// Test rows that are correctly classified negatives, in row order, capped at
// config.max_factuals when positive.
std::vector<Eigen::Index> SelectFactuals(const RunConfig& config,
                                         const models::ClassifierModel& clf,
                                         const data::TabularDataset& test);

struct GenerateSummary {
  int cells_written = 0;
  int cells_reused = 0;
  std::size_t invalid_trajectories = 0;
};

// Writes one trajectory file per (optimizer, iterations, alpha) cell. Cells
// whose file already matches the current models and settings are kept.
GenerateSummary GenerateStage(const RunConfig& config, std::uint64_t seed);

struct EvaluateSummary {
  std::vector<eval::ReportRow> rows;
  std::size_t invalid_trajectories = 0;
};

// Report rows for every cell and seed (plus pooled rows when there is more
// than one seed) and threshold curves pooled over seeds.
EvaluateSummary EvaluateStage(const RunConfig& config);

struct MetricGrid {
  Eigen::VectorXd z1, z2;     // grid axes
  Eigen::MatrixXd volume;     // sqrt det M at (z1(i), z2(j))
};

// Volume of the configured metric over a padded bounding box of the
// training codes. Requires a 2-D latent space.
MetricGrid ComputeMetricGrid(const RunConfig& config, const models::VaeModel& vae,
                             const models::ClassifierModel& clf,
                             const Eigen::MatrixXd& latent_codes);
void WriteMetricGridCsv(const std::filesystem::path& path, const MetricGrid& grid);

// metric-map command: loads the seed's checkpoints and writes metric_map.csv.
std::filesystem::path MetricMapStage(const RunConfig& config, std::uint64_t seed);

struct SynthDemoResult {
  double hole_volume = 0.0;  // mean sqrt det over codes of hole points
  double data_volume = 0.0;  // mean sqrt det over training codes
  std::size_t factuals = 0;
  // Per optimizer: share of decoded trajectory points within kCloudRadius
  // of the training data (measured in unnormalized surface coordinates),
  // and final-point realism.
  std::map<std::string, double> in_cloud_fraction;
  std::map<std::string, double> mean_realism;
  std::map<std::string, double> flip_ratio;
};

inline constexpr double kCloudRadius = 0.15;

// Trains the surface models, writes the metric map, per-optimizer
// trajectory CSVs and summary.json for factuals just below the hole.
SynthDemoResult SynthDemo(const RunConfig& config, std::uint64_t seed);

}  // namespace riemce::pipeline

#endif  // RIEMCE_PIPELINE_H_
