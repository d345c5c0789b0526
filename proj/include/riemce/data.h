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

#ifndef RIEMCE_DATA_H_
#define RIEMCE_DATA_H_

#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace riemce::data {

enum class FeatureKind { kContinuous, kBinary };

struct FeatureDescriptor {
  std::string name;
  FeatureKind kind = FeatureKind::kContinuous;
  bool immutable = false;
  bool log_transformed = false;
  // Min-max parameters; filled in by normalization.
  double min = 0.0;
  double max = 1.0;
};

// Rows are samples. Raw loaders return unnormalized features; Split()
// produces the normalized train/test pair.
struct TabularDataset {
  std::string name;
  Eigen::MatrixXd features;  // N x D
  Eigen::VectorXi labels;    // N, values in {0, 1}
  std::vector<FeatureDescriptor> descriptors;
  bool normalized = false;
  // Rows dropped while loading (missing fields, unmappable categories).
  std::size_t rejected_rows = 0;
  // Values clamped into [0, 1] when normalizing with foreign parameters.
  std::size_t clamped_values = 0;
  // Only for synthetic data: the generating 2-D coordinates (N x 2).
  Eigen::MatrixXd latent_truth;

  Eigen::Index size() const { return features.rows(); }
  Eigen::Index dim() const { return features.cols(); }

  // Mask resolved from the descriptors' immutable flags.
  std::vector<bool> ImmutableMask() const;
  std::vector<std::string> ImmutableNames() const;
  double PositiveRate() const;
  TabularDataset Subset(const std::vector<Eigen::Index>& rows) const;
};

// Resolves a list of feature names to a positional mask for `descriptors`.
// Throws ConfigError for names that do not exist.
std::vector<bool> MaskForNames(const std::vector<FeatureDescriptor>& descriptors,
                               const std::vector<std::string>& names);

// Per-feature min-max scaling to [0, 1].
class Normalizer {
 public:
  static Normalizer Fit(const Eigen::MatrixXd& features);

  // Applies the fitted scaling; values outside [0, 1] are clamped and
  // counted in `clamped` when non-null.
  Eigen::MatrixXd Apply(const Eigen::MatrixXd& features,
                        std::size_t* clamped = nullptr) const;
  Eigen::MatrixXd Invert(const Eigen::MatrixXd& normalized) const;

  const Eigen::VectorXd& min() const { return min_; }
  const Eigen::VectorXd& max() const { return max_; }

 private:
  Eigen::VectorXd min_;
  Eigen::VectorXd max_;
};

struct SplitResult {
  TabularDataset train;
  TabularDataset test;
  Normalizer normalizer;
};

// Seeded 75/25 shuffle split. Normalization parameters come from the train
// rows only and are recorded in both halves' descriptors.
SplitResult Split(const TabularDataset& raw, std::uint64_t seed,
                  double train_fraction = 0.75);

// Synthetic 2-D surface with a hole, embedded in R^3:
//   x = [z1, z2, 0.25 sin(z1)] + N(0, noise^2 I),
//   y = (sign(z2 - c z1^2) + 1) / 2.
struct SurfaceSpec {
  std::size_t samples = 4000;
  double noise = 0.1;
  double hole_radius = 1.0;
  Eigen::Vector2d hole_center = Eigen::Vector2d::Zero();
  double domain_low = -std::numbers::pi;
  double domain_high = std::numbers::pi;
  double boundary_coefficient = 2.5;
  std::uint64_t seed = 0;
};

Eigen::Vector3d SurfacePoint(const Eigen::Vector2d& z);
int SurfaceLabel(const Eigen::Vector2d& z, double boundary_coefficient = 2.5);
TabularDataset GenerateSurface(const SurfaceSpec& spec);

// Adult census income, 13 features:
//   age, fnlwgt, education_num, capital_gain, capital_loss, hours_per_week,
//   workclass_private, marital_not_married, occupation_other,
//   relationship_not_husband, race_white, sex_male, native_us.
// Capital gain/loss are log1p-transformed. Immutable: age, race_white,
// sex_male. Accepts the UCI files (no header, "|"-comment lines, trailing
// "." on test labels) or any CSV with a header naming the standard columns.
TabularDataset LoadAdult(const std::vector<std::filesystem::path>& paths);

// Give Me Some Credit (cs-training.csv schema), 10 features. Rows with any
// missing field are dropped; DebtRatio is log1p-transformed; immutable: age.
// With invert_label (default) y = 1 - SeriousDlqin2yrs.
TabularDataset LoadGmc(const std::filesystem::path& path, bool invert_label = true);

// Canonical dataset file: JSON schema + feature matrix in the checkpoint
// container.
void SaveDataset(const TabularDataset& dataset, const std::filesystem::path& path);
TabularDataset LoadDataset(const std::filesystem::path& path);

}  // namespace riemce::data

#endif  // RIEMCE_DATA_H_
