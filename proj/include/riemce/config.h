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

#ifndef RIEMCE_CONFIG_H_
#define RIEMCE_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "riemce/data.h"
#include "riemce/models.h"

namespace riemce {

// Everything a pipeline run needs. Serialized as a flat "key = value" file;
// lists are comma-separated and '#' starts a comment.
struct RunConfig {
  std::string dataset = "adult";  // adult | gmc | surface
  std::vector<std::string> raw_paths;
  std::string out = "runs";
  std::vector<std::uint64_t> seeds = {0};
  int parallelism = 1;

  models::ClassifierConfig classifier;
  models::VaeConfig vae;
  models::RbfConfig rbf;
  data::SurfaceSpec surface;
  bool gmc_invert_label = true;

  std::vector<std::string> optimizers = {"sgd", "rsgd", "rsgd_c"};
  std::vector<int> iterations = {50, 100, 150};
  std::vector<double> alphas = {0.0, 0.1};
  double step_size = 0.1;
  bool normalize = true;
  std::vector<double> thresholds = {0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95};
  double change_tolerance = 1e-5;
  int max_factuals = 0;  // 0 = every correct negative
  bool write_jsonl = false;
  int grid_size = 50;
  std::string metric = "enhanced";  // metric-map: pullback | enhanced

  void Validate() const;
};

// Defaults for a dataset (Adult/GMC follow the published recipe; the surface
// uses small models). Throws ConfigError for unknown datasets.
RunConfig DefaultConfig(const std::string& dataset);

// Applies one key/value pair. Throws ConfigError for unknown keys or values
// that do not parse.
void ApplyOption(RunConfig& config, const std::string& key, const std::string& value);

// Reads "key = value" lines.
std::map<std::string, std::string> ReadKeyValueFile(const std::filesystem::path& path);

// Defaults for the dataset named in `options` (or adult), then `options`.
RunConfig BuildConfig(const std::map<std::string, std::string>& options);

std::string SerializeConfig(const RunConfig& config);

// Per-component seeds derived from a root seed.
std::uint64_t ComponentSeed(std::uint64_t root, const std::string& component);

}  // namespace riemce

#endif  // RIEMCE_CONFIG_H_
