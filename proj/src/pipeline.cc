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

#include "riemce/pipeline.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "riemce/checkpoint.h"
#include "riemce/errors.h"
#include "riemce/geometry.h"
#include "riemce/parallel.h"

namespace riemce::pipeline {
namespace {

namespace fs = std::filesystem;
using counterfactual::CeTrajectory;

std::ofstream OpenForWrite(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << std::setprecision(10);
  return out;
}

void WriteJson(const fs::path& path, const nlohmann::json& value) {
  OpenForWrite(path) << value.dump(2) << "\n";
}

fs::path RequireFile(const fs::path& path, const std::string& hint) {
  if (!fs::exists(path)) throw IoError("missing '" + path.string() + "'; " + hint);
  return path;
}

models::ClassifierModel LoadClassifierFor(const RunConfig& config, std::uint64_t seed) {
  return models::LoadClassifier(RequireFile(SeedDir(config, seed) / "classifier.ckpt",
                                            "run train-classifier first"));
}

models::VaeModel LoadVaeFor(const RunConfig& config, std::uint64_t seed) {
  return models::LoadVae(
      RequireFile(SeedDir(config, seed) / "vae.ckpt", "run train-vae first"));
}

double Mean(const std::vector<double>& values) {
  return values.empty() ? std::nan("") : eval::PairwiseSum(values) / static_cast<double>(values.size());
}

std::function<double(const Eigen::VectorXd&)> VolumeFunction(const RunConfig& config,
                                                              const models::VaeModel& vae,
                                                              const models::ClassifierModel& clf) {
  if (config.metric == "pullback")
    return [&vae](const Eigen::VectorXd& z) {
      return geometry::MetricVolume(geometry::PullbackMetric(vae, z));
    };
  return [&vae, &clf](const Eigen::VectorXd& z) {
    return geometry::MetricVolume(geometry::EnhancedMetric(vae, clf, z));
  };
}

}  // namespace

fs::path DatasetDir(const RunConfig& config) { return fs::path(config.out) / config.dataset; }

fs::path SeedDir(const RunConfig& config, std::uint64_t seed) {
  return DatasetDir(config) / ("seed_" + std::to_string(seed));
}

std::string CellName(const std::string& optimizer, int iterations, double alpha) {
  std::ostringstream name;
  name << optimizer << "_it" << iterations << "_a" << alpha;
  return name.str();
}

Splits PrepareData(const RunConfig& config, std::uint64_t seed) {
  const fs::path dir = SeedDir(config, seed);
  const fs::path train_path = dir / "train.ds";
  const fs::path test_path = dir / "test.ds";
  if (fs::exists(train_path) && fs::exists(test_path)) {
    Splits splits{data::LoadDataset(train_path), data::LoadDataset(test_path)};
    if (splits.train.name != config.dataset || splits.test.name != config.dataset)
      throw SchemaError("'" + dir.string() + "' holds a '" + splits.train.name +
                        "' split, not '" + config.dataset + "'");
    return splits;
  }

  data::TabularDataset raw;
  if (config.dataset == "surface") {
    data::SurfaceSpec spec = config.surface;
    spec.seed = ComponentSeed(seed, "surface");
    raw = data::GenerateSurface(spec);
  } else {
    if (config.raw_paths.empty()) throw ConfigError("raw_path is required for " + config.dataset);
    std::vector<fs::path> paths;
    for (const std::string& p : config.raw_paths)
      paths.push_back(RequireFile(p, "set raw_path to the downloaded " + config.dataset + " data"));
    raw = config.dataset == "adult" ? data::LoadAdult(paths)
                                    : data::LoadGmc(paths.front(), config.gmc_invert_label);
  }
  data::SplitResult split = data::Split(raw, seed);
  fs::create_directories(dir);
  data::SaveDataset(split.train, train_path);
  data::SaveDataset(split.test, test_path);
  return {std::move(split.train), std::move(split.test)};
}

models::ClassifierModel TrainClassifierStage(const RunConfig& config, std::uint64_t seed) {
  const Splits splits = PrepareData(config, seed);
  models::ClassifierConfig settings = config.classifier;
  settings.seed = ComponentSeed(seed, "classifier");
  models::TrainingLog log;
  models::ClassifierModel model = models::TrainClassifier(splits.train, &splits.test, settings, &log);
  const fs::path dir = SeedDir(config, seed);
  models::SaveClassifier(model, dir / "classifier.ckpt");
  log.WriteCsv(dir / "classifier_log.csv");
  WriteJson(dir / "classifier_metrics.json",
            {{"train_balanced_accuracy", model.train_balanced_accuracy},
             {"test_balanced_accuracy", model.test_balanced_accuracy}});
  return model;
}

models::VaeModel TrainVaeStage(const RunConfig& config, std::uint64_t seed) {
  const Splits splits = PrepareData(config, seed);
  models::VaeConfig vae_settings = config.vae;
  vae_settings.seed = ComponentSeed(seed, "vae");
  models::RbfConfig rbf_settings = config.rbf;
  rbf_settings.seed = ComponentSeed(seed, "rbf");
  models::TrainingLog warmup_log, variance_log;
  models::VaeModel vae = models::TrainVaeWarmup(splits.train, vae_settings, &warmup_log);
  models::FitDecoderVariance(vae, splits.train, rbf_settings, &variance_log);
  const fs::path dir = SeedDir(config, seed);
  models::SaveVae(vae, dir / "vae.ckpt");
  warmup_log.WriteCsv(dir / "vae_warmup_log.csv");
  variance_log.WriteCsv(dir / "vae_variance_log.csv");
  WriteJson(dir / "vae_metrics.json",
            {{"warmup_reconstruction_mse", vae.warmup_reconstruction_mse}});
  return vae;
}

std::vector<Eigen::Index> SelectFactuals(const RunConfig& config,
                                         const models::ClassifierModel& clf,
                                         const data::TabularDataset& test) {
  std::vector<Eigen::Index> rows =
      counterfactual::CorrectNegatives(clf, test.features, test.labels);
  if (config.max_factuals > 0 && rows.size() > static_cast<std::size_t>(config.max_factuals))
    rows.resize(static_cast<std::size_t>(config.max_factuals));
  return rows;
}

GenerateSummary GenerateStage(const RunConfig& config, std::uint64_t seed) {
  const Splits splits = PrepareData(config, seed);
  const fs::path dir = SeedDir(config, seed);
  const models::ClassifierModel clf = LoadClassifierFor(config, seed);
  const models::VaeModel vae = LoadVaeFor(config, seed);
  const std::vector<Eigen::Index> rows = SelectFactuals(config, clf, splits.test);
  Eigen::MatrixXd factuals(static_cast<Eigen::Index>(rows.size()), splits.test.dim());
  for (std::size_t i = 0; i < rows.size(); ++i)
    factuals.row(static_cast<Eigen::Index>(i)) = splits.test.features.row(rows[i]);

  nlohmann::json base = {{"dataset", config.dataset},
                         {"seed", seed},
                         {"step_size", config.step_size},
                         {"normalize", config.normalize},
                         {"thresholds", config.thresholds},
                         {"factual_rows", rows},
                         {"classifier", FileFingerprint(dir / "classifier.ckpt")},
                         {"vae", FileFingerprint(dir / "vae.ckpt")}};
  const int longest = *std::max_element(config.iterations.begin(), config.iterations.end());

  GenerateSummary summary;
  for (const std::string& optimizer : config.optimizers) {
    const counterfactual::Optimizer kind = counterfactual::ParseOptimizer(optimizer);
    if (kind != counterfactual::Optimizer::kSgd && !vae.has_variance())
      throw SchemaError("vae.ckpt has no fitted decoder variance");
    for (double alpha : config.alphas) {
      auto cell_meta = [&](int iterations) {
        nlohmann::json meta = base;
        meta["optimizer"] = optimizer;
        meta["alpha"] = alpha;
        meta["iterations"] = iterations;
        return meta;
      };
      auto cell_path = [&](int iterations) {
        return dir / "ce" / (CellName(optimizer, iterations, alpha) + ".traj");
      };
      const bool up_to_date = std::all_of(
          config.iterations.begin(), config.iterations.end(), [&](int iterations) {
            if (!fs::exists(cell_path(iterations))) return false;
            try {
              return counterfactual::LoadTrajectories(cell_path(iterations)).meta ==
                     cell_meta(iterations);
            } catch (const Error&) {
              return false;
            }
          });
      if (up_to_date) {
        summary.cells_reused += static_cast<int>(config.iterations.size());
        continue;
      }

      // Shorter budgets are prefixes of the longest run.
      counterfactual::CeConfig settings;
      settings.optimizer = kind;
      settings.step_size = config.step_size;
      settings.iterations = longest;
      settings.alpha = alpha;
      settings.thresholds = config.thresholds;
      settings.normalize = config.normalize;
      const std::vector<CeTrajectory> runs =
          counterfactual::GenerateBatch(vae, clf, factuals, settings, config.parallelism);
      for (int iterations : config.iterations) {
        std::vector<CeTrajectory> cut;
        cut.reserve(runs.size());
        for (const CeTrajectory& run : runs)
          cut.push_back(counterfactual::Truncate(run, iterations, config.thresholds));
        for (const CeTrajectory& run : cut) summary.invalid_trajectories += run.valid ? 0 : 1;
        counterfactual::SaveTrajectories(cell_path(iterations), cut, cell_meta(iterations));
        if (config.write_jsonl) {
          fs::path jsonl = cell_path(iterations);
          counterfactual::WriteTrajectoriesJsonl(jsonl.replace_extension(".jsonl"), cut);
        }
        ++summary.cells_written;
      }
    }
  }
  return summary;
}

EvaluateSummary EvaluateStage(const RunConfig& config) {
  struct Cell {
    int iterations;
    double alpha;
    std::string optimizer;
  };
  std::vector<Cell> cells;
  for (int iterations : config.iterations)
    for (double alpha : config.alphas)
      for (const std::string& optimizer : config.optimizers) cells.push_back({iterations, alpha, optimizer});

  EvaluateSummary summary;
  std::vector<std::vector<eval::ReportRow>> seed_rows(cells.size());
  std::vector<std::vector<eval::CeMetrics>> pooled(cells.size());
  for (std::uint64_t seed : config.seeds) {
    const Splits splits = PrepareData(config, seed);
    const models::ClassifierModel clf = LoadClassifierFor(config, seed);
    const eval::NearestNeighbor neighbors(splits.train.features);
    eval::EvalContext context;
    context.classifier = &clf;
    context.neighbors = &neighbors;
    context.immutable = splits.train.ImmutableMask();
    context.tolerance = config.change_tolerance;
    context.parallelism = config.parallelism;
    const fs::path dir = SeedDir(config, seed);

    for (std::size_t c = 0; c < cells.size(); ++c) {
      const Cell& cell = cells[c];
      const std::string name = CellName(cell.optimizer, cell.iterations, cell.alpha);
      const counterfactual::TrajectoryFile file = counterfactual::LoadTrajectories(
          RequireFile(dir / "ce" / (name + ".traj"), "run generate-ce first"));
      const std::string dataset = file.meta.value("dataset", "");
      if (dataset != config.dataset)
        throw SchemaError("'" + name + "' for seed " + std::to_string(seed) +
                          " holds trajectories for dataset '" + dataset + "', not '" +
                          config.dataset + "'");
      if (file.meta.value("iterations", -1) != cell.iterations ||
          file.meta.value("optimizer", "") != cell.optimizer)
        throw SchemaError("'" + name + "' does not match its cell");

      for (const CeTrajectory& run : file.trajectories)
        summary.invalid_trajectories += run.valid ? 0 : 1;
      const std::vector<eval::CeMetrics> metrics =
          eval::EvaluateTrajectories(file.trajectories, context);
      seed_rows[c].push_back(eval::SummarizeCell(metrics, cell.iterations, cell.alpha > 0,
                                                 cell.optimizer, std::to_string(seed)));
      pooled[c].insert(pooled[c].end(), metrics.begin(), metrics.end());
      eval::WriteCurveCsv(
          dir / "curves" / (name + ".csv"),
          eval::CtrCurve(file.trajectories, config.thresholds, neighbors, config.parallelism));
    }
  }

  for (std::size_t c = 0; c < cells.size(); ++c) {
    summary.rows.insert(summary.rows.end(), seed_rows[c].begin(), seed_rows[c].end());
    if (config.seeds.size() > 1)
      summary.rows.push_back(eval::SummarizeCell(pooled[c], cells[c].iterations,
                                                 cells[c].alpha > 0, cells[c].optimizer,
                                                 "pooled"));
  }
  eval::WriteReportCsv(DatasetDir(config) / "report.csv", summary.rows);
  eval::WriteReportJson(DatasetDir(config) / "report.json", summary.rows);
  return summary;
}

MetricGrid ComputeMetricGrid(const RunConfig& config, const models::VaeModel& vae,
                             const models::ClassifierModel& clf,
                             const Eigen::MatrixXd& latent_codes) {
  if (vae.latent_dim() != 2) throw ConfigError("metric maps need a 2-D latent space");
  if (latent_codes.rows() == 0 || latent_codes.cols() != 2)
    throw ShapeError("metric map needs N x 2 latent codes");
  const Eigen::RowVector2d low = latent_codes.colwise().minCoeff();
  const Eigen::RowVector2d high = latent_codes.colwise().maxCoeff();
  const Eigen::RowVector2d pad = 0.1 * (high - low);
  const Eigen::Index n = config.grid_size;
  MetricGrid grid;
  grid.z1 = Eigen::VectorXd::LinSpaced(n, low(0) - pad(0), high(0) + pad(0));
  grid.z2 = Eigen::VectorXd::LinSpaced(n, low(1) - pad(1), high(1) + pad(1));
  grid.volume.resize(n, n);
  const auto volume = VolumeFunction(config, vae, clf);
  ParallelFor(static_cast<std::size_t>(n * n), config.parallelism, [&](std::size_t k) {
    const auto i = static_cast<Eigen::Index>(k) / n;
    const auto j = static_cast<Eigen::Index>(k) % n;
    try {
      grid.volume(i, j) = volume(Eigen::Vector2d(grid.z1(i), grid.z2(j)));
    } catch (const SingularMetricError&) {
      grid.volume(i, j) = std::nan("");
    }
  });
  return grid;
}

void WriteMetricGridCsv(const fs::path& path, const MetricGrid& grid) {
  std::ofstream out = OpenForWrite(path);
  out << "z1,z2,sqrt_det\n";
  for (Eigen::Index i = 0; i < grid.z1.size(); ++i)
    for (Eigen::Index j = 0; j < grid.z2.size(); ++j)
      out << grid.z1(i) << "," << grid.z2(j) << "," << grid.volume(i, j) << "\n";
}

fs::path MetricMapStage(const RunConfig& config, std::uint64_t seed) {
  const Splits splits = PrepareData(config, seed);
  const models::ClassifierModel clf = LoadClassifierFor(config, seed);
  const models::VaeModel vae = LoadVaeFor(config, seed);
  if (!vae.has_variance()) throw SchemaError("vae.ckpt has no fitted decoder variance");
  const fs::path path = SeedDir(config, seed) / "metric_map.csv";
  WriteMetricGridCsv(path, ComputeMetricGrid(config, vae, clf, vae.EncodeRows(splits.train.features)));
  return path;
}

SynthDemoResult SynthDemo(const RunConfig& config, std::uint64_t seed) {
  if (config.dataset != "surface") throw ConfigError("synth-demo runs on the surface dataset");
  const Splits splits = PrepareData(config, seed);
  const models::ClassifierModel clf = TrainClassifierStage(config, seed);
  const models::VaeModel vae = TrainVaeStage(config, seed);
  const fs::path dir = SeedDir(config, seed);
  const Eigen::MatrixXd codes = vae.EncodeRows(splits.train.features);
  WriteMetricGridCsv(dir / "metric_map.csv", ComputeMetricGrid(config, vae, clf, codes));

  SynthDemoResult result;
  const auto volume = VolumeFunction(config, vae, clf);
  std::vector<double> data_volumes(static_cast<std::size_t>(codes.rows()));
  ParallelFor(data_volumes.size(), config.parallelism, [&](std::size_t i) {
    data_volumes[i] = volume(codes.row(static_cast<Eigen::Index>(i)).transpose());
  });
  result.data_volume = Mean(data_volumes);

  // Noise-free surface points on a grid over the hole disc, normalized like
  // the training data and encoded.
  const Eigen::Vector2d center = config.surface.hole_center;
  const double radius = config.surface.hole_radius;
  std::vector<Eigen::VectorXd> hole_codes;
  const int n = config.grid_size;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      const Eigen::Vector2d u(center(0) + radius * (2.0 * (a + 0.5) / n - 1.0),
                              center(1) + radius * (2.0 * (b + 0.5) / n - 1.0));
      if ((u - center).norm() >= radius) continue;
      Eigen::VectorXd x = data::SurfacePoint(u);
      for (Eigen::Index j = 0; j < x.size(); ++j) {
        const auto& d = splits.train.descriptors[static_cast<std::size_t>(j)];
        x(j) = d.max > d.min ? (x(j) - d.min) / (d.max - d.min) : 0.0;
      }
      hole_codes.push_back(vae.Encode(x));
    }
  std::vector<double> hole_volumes(hole_codes.size());
  ParallelFor(hole_codes.size(), config.parallelism,
              [&](std::size_t i) { hole_volumes[i] = volume(hole_codes[i]); });
  result.hole_volume = Mean(hole_volumes);

  // Factuals: correct negatives whose generating coordinates sit directly
  // below the hole, so the target region lies across it.
  std::vector<Eigen::Index> rows;
  for (Eigen::Index r : counterfactual::CorrectNegatives(clf, splits.test.features, splits.test.labels)) {
    const Eigen::Vector2d u = splits.test.latent_truth.row(r).transpose();
    if (std::abs(u(0) - center(0)) <= radius && u(1) < center(1) - radius) rows.push_back(r);
  }
  if (config.max_factuals > 0 && rows.size() > static_cast<std::size_t>(config.max_factuals))
    rows.resize(static_cast<std::size_t>(config.max_factuals));
  if (rows.empty()) throw StateError("no correctly classified negatives below the hole");
  result.factuals = rows.size();
  Eigen::MatrixXd factuals(static_cast<Eigen::Index>(rows.size()), splits.test.dim());
  for (std::size_t i = 0; i < rows.size(); ++i)
    factuals.row(static_cast<Eigen::Index>(i)) = splits.test.features.row(rows[i]);

  // The cloud test runs in the surface's own units.
  auto to_surface_units = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd raw(x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      const auto& d = splits.train.descriptors[static_cast<std::size_t>(j)];
      raw(j) = d.min + x(j) * (d.max - d.min);
    }
    return raw;
  };
  Eigen::MatrixXd raw_train(splits.train.size(), splits.train.dim());
  for (Eigen::Index r = 0; r < raw_train.rows(); ++r)
    raw_train.row(r) = to_surface_units(splits.train.features.row(r).transpose()).transpose();
  const eval::NearestNeighbor neighbors(splits.train.features);
  const eval::NearestNeighbor cloud(raw_train);
  nlohmann::json optimizers = nlohmann::json::object();
  for (const std::string& optimizer : config.optimizers) {
    counterfactual::CeConfig settings;
    settings.optimizer = counterfactual::ParseOptimizer(optimizer);
    settings.step_size = config.step_size;
    settings.iterations = config.iterations.front();
    settings.alpha = config.alphas.front();
    settings.thresholds = config.thresholds;
    settings.normalize = config.normalize;
    const std::vector<CeTrajectory> runs =
        counterfactual::GenerateBatch(vae, clf, factuals, settings, config.parallelism);

    std::ofstream out = OpenForWrite(dir / ("trajectories_" + optimizer + ".csv"));
    out << "trajectory,step,z1,z2,x1,x2,x3,confidence,distance_to_data\n";
    std::size_t points = 0, inside = 0, flipped = 0;
    std::vector<double> realism;
    for (const CeTrajectory& run : runs) {
      for (std::size_t t = 0; t < run.steps.size(); ++t) {
        const auto& s = run.steps[t];
        const double distance = cloud.Distance(to_surface_units(s.x_hat));
        ++points;
        inside += distance <= kCloudRadius ? 1 : 0;
        out << run.index << "," << t << "," << s.z(0) << "," << s.z(1);
        for (Eigen::Index j = 0; j < s.x_hat.size(); ++j) out << "," << s.x_hat(j);
        out << "," << s.confidence << "," << distance << "\n";
      }
      if (run.steps.empty()) continue;
      realism.push_back(neighbors.Distance(run.steps.back().x_hat));
      flipped += run.steps.back().confidence >= 0.5 ? 1 : 0;
    }
    result.in_cloud_fraction[optimizer] =
        points ? static_cast<double>(inside) / static_cast<double>(points) : std::nan("");
    result.mean_realism[optimizer] = Mean(realism);
    result.flip_ratio[optimizer] = static_cast<double>(flipped) / static_cast<double>(runs.size());
    optimizers[optimizer] = {{"in_cloud_fraction", result.in_cloud_fraction[optimizer]},
                             {"mean_final_l_d", result.mean_realism[optimizer]},
                             {"flip_ratio", result.flip_ratio[optimizer]}};
  }
  WriteJson(dir / "summary.json", {{"metric", config.metric},
                                   {"hole_mean_sqrt_det", result.hole_volume},
                                   {"data_mean_sqrt_det", result.data_volume},
                                   {"hole_to_data_ratio", result.hole_volume / result.data_volume},
                                   {"factuals", result.factuals},
                                   {"cloud_radius", kCloudRadius},
                                   {"optimizers", optimizers}});
  return result;
}

}  // namespace riemce::pipeline
