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

#include "riemce/data.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>

#include <gtest/gtest.h>

#include "riemce/errors.h"

namespace riemce::data {
namespace {

namespace fs = std::filesystem;

fs::path TempPath(const std::string& name) {
  return fs::temp_directory_path() / ("riemce_data_test_" + name);
}

void WriteFile(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

TEST(SurfaceTest, NoiselessPointAndLabel) {
  const Eigen::Vector3d x = SurfacePoint({std::numbers::pi / 2, std::numbers::pi});
  EXPECT_DOUBLE_EQ(x(0), std::numbers::pi / 2);
  EXPECT_DOUBLE_EQ(x(1), std::numbers::pi);
  EXPECT_DOUBLE_EQ(x(2), 0.25);
  EXPECT_EQ(SurfaceLabel({0.1, 2.0}), 1);
  EXPECT_EQ(SurfaceLabel({1.0, 2.0}), 0);
}

// Fraction of the domain (minus the hole) where z2 > c z1^2, by midpoint
// quadrature on a fine grid.
double PositiveAreaFraction(const SurfaceSpec& spec, int grid = 2000) {
  const double h = (spec.domain_high - spec.domain_low) / grid;
  double positive = 0, total = 0;
  for (int i = 0; i < grid; ++i) {
    for (int j = 0; j < grid; ++j) {
      const Eigen::Vector2d z(spec.domain_low + (i + 0.5) * h,
                              spec.domain_low + (j + 0.5) * h);
      if ((z - spec.hole_center).norm() < spec.hole_radius) continue;
      total += 1;
      positive += z(1) - spec.boundary_coefficient * z(0) * z(0) > 0 ? 1 : 0;
    }
  }
  return positive / total;
}

TEST(SurfaceTest, HoleIsEmptyAndPrevalenceMatchesArea) {
  SurfaceSpec spec;
  spec.samples = 10000;
  spec.seed = 5;
  const TabularDataset surface = GenerateSurface(spec);
  ASSERT_EQ(surface.size(), 10000);
  for (Eigen::Index i = 0; i < surface.size(); ++i)
    ASSERT_GE((surface.latent_truth.row(i).transpose() - spec.hole_center).norm(),
              spec.hole_radius);
  EXPECT_NEAR(surface.PositiveRate(), PositiveAreaFraction(spec), 0.02);
}

TEST(SurfaceTest, NoiseScaleRecovered) {
  SurfaceSpec spec;
  spec.samples = 10000;
  spec.seed = 9;
  const TabularDataset surface = GenerateSurface(spec);
  Eigen::VectorXd residual(surface.size());
  for (Eigen::Index i = 0; i < surface.size(); ++i)
    residual(i) = surface.features(i, 2) - 0.25 * std::sin(surface.latent_truth(i, 0));
  const double mean = residual.mean();
  const double stddev =
      std::sqrt((residual.array() - mean).square().sum() / (residual.size() - 1));
  EXPECT_NEAR(stddev, 0.1, 0.01);
}

TEST(SurfaceTest, LiteralHoleReadingAvailable) {
  SurfaceSpec spec;
  spec.domain_low = 0.0;
  spec.domain_high = 2 * std::numbers::pi;
  spec.hole_radius = 0.2;
  spec.samples = 500;
  EXPECT_EQ(GenerateSurface(spec).size(), 500);
  spec.noise = 0.0;
  EXPECT_THROW(GenerateSurface(spec), ConfigError);
}

TEST(SplitTest, ExactProportionsAndDeterminism) {
  SurfaceSpec spec;
  spec.samples = 100;
  const TabularDataset raw = GenerateSurface(spec);
  const SplitResult a = Split(raw, 17);
  const SplitResult b = Split(raw, 17);
  const SplitResult c = Split(raw, 18);
  EXPECT_EQ(a.train.size(), 75);
  EXPECT_EQ(a.test.size(), 25);
  EXPECT_TRUE(a.train.features == b.train.features);
  EXPECT_TRUE(a.test.labels == b.test.labels);
  EXPECT_FALSE(a.train.features == c.train.features);
  EXPECT_GE(a.train.features.minCoeff(), 0.0);
  EXPECT_LE(a.train.features.maxCoeff(), 1.0);
  EXPECT_GE(a.test.features.minCoeff(), 0.0);
  EXPECT_LE(a.test.features.maxCoeff(), 1.0);
}

TEST(SplitTest, DisjointAndExhaustive) {
  SurfaceSpec spec;
  spec.samples = 200;
  const TabularDataset raw = GenerateSurface(spec);
  const SplitResult s = Split(raw, 3);
  // latent_truth rows are unique identifiers of the generated points.
  std::set<std::pair<double, double>> seen;
  for (const auto* part : {&s.train, &s.test})
    for (Eigen::Index i = 0; i < part->size(); ++i)
      seen.insert({part->latent_truth(i, 0), part->latent_truth(i, 1)});
  EXPECT_EQ(seen.size(), 200u);
}

TEST(SplitTest, NormalizationUsesTrainRowsOnly) {
  SurfaceSpec spec;
  spec.samples = 400;
  const TabularDataset raw = GenerateSurface(spec);
  const SplitResult s = Split(raw, 11);
  const Normalizer on_test = Normalizer::Fit(s.normalizer.Invert(s.test.features));
  EXPECT_FALSE(on_test.min().isApprox(s.normalizer.min()));
  const Normalizer refit = Normalizer::Fit(s.normalizer.Invert(s.train.features));
  EXPECT_TRUE(refit.min().isApprox(s.normalizer.min(), 1e-12));
  EXPECT_TRUE(refit.max().isApprox(s.normalizer.max(), 1e-12));
}

TEST(SplitTest, TooFewRows) {
  SurfaceSpec spec;
  spec.samples = 3;
  EXPECT_THROW(Split(GenerateSurface(spec), 1), ConfigError);
}

TEST(NormalizerTest, Idempotent) {
  Eigen::MatrixXd x(4, 2);
  x << 1, 10, 2, 20, 3, 30, 5, 25;
  const Normalizer n = Normalizer::Fit(x);
  const Eigen::MatrixXd once = n.Apply(x);
  const Eigen::MatrixXd twice = Normalizer::Fit(once).Apply(once);
  EXPECT_TRUE(once.isApprox(twice, 1e-15));
}

TEST(NormalizerTest, ClampsAndCounts) {
  Eigen::MatrixXd train(2, 1), test(3, 1);
  train << 0, 10;
  test << -1, 5, 12;
  std::size_t clamped = 0;
  const Eigen::MatrixXd out = Normalizer::Fit(train).Apply(test, &clamped);
  EXPECT_EQ(clamped, 2u);
  EXPECT_EQ(out(0, 0), 0.0);
  EXPECT_EQ(out(1, 0), 0.5);
  EXPECT_EQ(out(2, 0), 1.0);
}

const char* kAdultHeader =
    "age,workclass,fnlwgt,education,education-num,marital-status,occupation,"
    "relationship,race,sex,capital-gain,capital-loss,hours-per-week,native-country,"
    "income\n";

TEST(AdultTest, EncodingRules) {
  const fs::path path = TempPath("adult.csv");
  WriteFile(path, std::string(kAdultHeader) +
                      "39, State-gov, 77516, Bachelors, 13, Never-married, Adm-clerical, "
                      "Not-in-family, White, Male, 2174, 0, 40, United-States, <=50K\n"
                      "50, Private, 83311, Bachelors, 13, Married-civ-spouse, "
                      "Exec-managerial, Wife, Black, Female, 0, 0, 13, Cuba, >50K.\n"
                      "38, ?, 215646, HS-grad, 9, Divorced, ?, Unmarried, White, Female, "
                      "0, 0, 40, ?, <=50K\n"
                      "38, Private, 215646, HS-grad, 9, Divorced, Sales, Unmarried, White, "
                      "Unknown, 0, 0, 40, Peru, <=50K\n");
  const TabularDataset adult = LoadAdult({path});
  ASSERT_EQ(adult.size(), 3);
  EXPECT_EQ(adult.dim(), 13);
  EXPECT_EQ(adult.rejected_rows, 1u);
  const auto idx = [&](const std::string& name) {
    for (std::size_t j = 0; j < adult.descriptors.size(); ++j)
      if (adult.descriptors[j].name == name) return static_cast<Eigen::Index>(j);
    return Eigen::Index{-1};
  };
  EXPECT_EQ(adult.features(1, idx("sex_male")), 0.0);
  EXPECT_EQ(adult.features(0, idx("sex_male")), 1.0);
  EXPECT_EQ(adult.features(1, idx("capital_gain")), 0.0);
  EXPECT_DOUBLE_EQ(adult.features(0, idx("capital_gain")), std::log1p(2174.0));
  EXPECT_EQ(adult.features(0, idx("workclass_private")), 0.0);
  EXPECT_EQ(adult.features(1, idx("workclass_private")), 1.0);
  EXPECT_EQ(adult.features(1, idx("marital_not_married")), 0.0);
  EXPECT_EQ(adult.features(1, idx("occupation_other")), 0.0);
  EXPECT_EQ(adult.features(2, idx("occupation_other")), 1.0);
  EXPECT_EQ(adult.features(1, idx("relationship_not_husband")), 1.0);
  EXPECT_EQ(adult.features(1, idx("native_us")), 0.0);
  EXPECT_EQ(adult.labels(0), 0);
  EXPECT_EQ(adult.labels(1), 1);
  const auto immutable = adult.ImmutableNames();
  EXPECT_EQ(immutable, (std::vector<std::string>{"age", "race_white", "sex_male"}));
}

TEST(AdultTest, MissingColumnIsSchemaError) {
  const fs::path path = TempPath("adult_bad.csv");
  WriteFile(path, "age,workclass\n39,Private\n");
  EXPECT_THROW(LoadAdult({path}), SchemaError);
}

TEST(AdultTest, ZeroCapitalGainNormalizesToZero) {
  const fs::path path = TempPath("adult_gain.csv");
  std::string text = kAdultHeader;
  for (int i = 0; i < 8; ++i)
    text += std::to_string(30 + i) + ", Private, 1000" + std::to_string(i) +
            ", HS-grad, 9, Divorced, Sales, Unmarried, White, Male, " +
            std::to_string(i * 100) + ", 0, 40, United-States, <=50K\n";
  WriteFile(path, text);
  const SplitResult s = Split(LoadAdult({path}), 1);
  for (const auto* part : {&s.train, &s.test})
    for (Eigen::Index i = 0; i < part->size(); ++i)
      if (s.normalizer.Invert(part->features.row(i))(0, 3) == 0.0)
        EXPECT_EQ(part->features(i, 3), 0.0);
}

TEST(AdultTest, RealFilesWhenPresent) {
  const fs::path dir = fs::path(RIEMCE_DATA_DIR) / "adult";
  if (!fs::exists(dir / "adult.data")) GTEST_SKIP() << "Adult files not present";
  const TabularDataset adult = LoadAdult({dir / "adult.data", dir / "adult.test"});
  EXPECT_EQ(adult.size(), 48842);
  EXPECT_EQ(adult.rejected_rows, 0u);
  EXPECT_NEAR(adult.PositiveRate(), 0.24, 0.01);
}

TEST(GmcTest, DropsMissingAndLogTransforms) {
  const fs::path path = TempPath("gmc.csv");
  WriteFile(path,
            ",SeriousDlqin2yrs,RevolvingUtilizationOfUnsecuredLines,age,"
            "NumberOfTime30-59DaysPastDueNotWorse,DebtRatio,MonthlyIncome,"
            "NumberOfOpenCreditLinesAndLoans,NumberOfTimes90DaysLate,"
            "NumberRealEstateLoansOrLines,NumberOfTime60-89DaysPastDueNotWorse,"
            "NumberOfDependents\n"
            "1,1,0.766,45,2,0.803,9120,13,0,6,0,2\n"
            "2,0,0.957,40,0,0.121,NA,4,0,0,0,1\n"
            "3,0,0.658,38,1,0.085,3042,2,1,0,0,0\n");
  const TabularDataset gmc = LoadGmc(path);
  ASSERT_EQ(gmc.size(), 2);
  EXPECT_EQ(gmc.dim(), 10);
  EXPECT_EQ(gmc.rejected_rows, 1u);
  EXPECT_DOUBLE_EQ(gmc.features(0, 3), std::log1p(0.803));
  EXPECT_EQ(gmc.labels(0), 0);  // distress 1 -> inverted label 0
  EXPECT_EQ(gmc.labels(1), 1);
  EXPECT_EQ(LoadGmc(path, false).labels(0), 1);
  EXPECT_EQ(gmc.ImmutableNames(), std::vector<std::string>{"age"});
}

TEST(GmcTest, MissingColumnIsSchemaError) {
  const fs::path path = TempPath("gmc_bad.csv");
  WriteFile(path, "SeriousDlqin2yrs,age\n1,40\n");
  EXPECT_THROW(LoadGmc(path), SchemaError);
}

TEST(GmcTest, RealFileWhenPresent) {
  const fs::path path = fs::path(RIEMCE_DATA_DIR) / "gmc" / "cs-training.csv";
  if (!fs::exists(path)) GTEST_SKIP() << "GMC file not present";
  const TabularDataset gmc = LoadGmc(path);
  EXPECT_NEAR(static_cast<double>(gmc.size()), 116000.0, 1000.0);
  EXPECT_NEAR(gmc.PositiveRate(), 0.93, 0.01);
}

TEST(ImmutableMaskTest, NamesSurviveReordering) {
  std::vector<FeatureDescriptor> descriptors = {{"a"}, {"age"}, {"b"}, {"sex_male"}};
  EXPECT_EQ(MaskForNames(descriptors, {"age", "sex_male"}),
            (std::vector<bool>{false, true, false, true}));
  std::swap(descriptors[0], descriptors[3]);
  EXPECT_EQ(MaskForNames(descriptors, {"age", "sex_male"}),
            (std::vector<bool>{true, true, false, false}));
  EXPECT_THROW(MaskForNames(descriptors, {"income"}), ConfigError);
}

TEST(DatasetFileTest, RoundTrip) {
  SurfaceSpec spec;
  spec.samples = 50;
  const SplitResult s = Split(GenerateSurface(spec), 2);
  const fs::path path = TempPath("dataset.bin");
  SaveDataset(s.train, path);
  const TabularDataset loaded = LoadDataset(path);
  EXPECT_TRUE(loaded.features == s.train.features);
  EXPECT_TRUE(loaded.labels == s.train.labels);
  EXPECT_EQ(loaded.descriptors.size(), 3u);
  EXPECT_EQ(loaded.descriptors[1].max, s.train.descriptors[1].max);
}

}  // namespace
}  // namespace riemce::data
