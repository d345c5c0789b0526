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

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string_view>

#include "riemce/checkpoint.h"
#include "riemce/errors.h"
#include "riemce/rng.h"

namespace riemce::data {
namespace {

std::string_view Trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' ||
                        s.back() == '"'))
    s.remove_suffix(1);
  return s;
}

std::vector<std::string> SplitCsvLine(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    fields.emplace_back(Trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

std::optional<double> ParseNumber(std::string_view s) {
  s = Trim(s);
  if (s.empty()) return std::nullopt;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(value))
    return std::nullopt;
  return value;
}

// Lowercase, with '_' and '.' folded to '-', so "education_num",
// "education.num" and "education-num" all match.
std::string CanonicalColumn(std::string_view s) {
  std::string out(Trim(s));
  for (char& c : out) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (c == '_' || c == '.') c = '-';
  }
  return out;
}

std::ifstream OpenOrThrow(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return in;
}

const std::vector<std::string> kAdultColumns = {
    "age",          "workclass",     "fnlwgt",         "education",
    "education-num", "marital-status", "occupation",    "relationship",
    "race",         "sex",           "capital-gain",   "capital-loss",
    "hours-per-week", "native-country", "income"};

}  // namespace

std::vector<bool> TabularDataset::ImmutableMask() const {
  std::vector<bool> mask;
  for (const auto& d : descriptors) mask.push_back(d.immutable);
  return mask;
}

std::vector<std::string> TabularDataset::ImmutableNames() const {
  std::vector<std::string> names;
  for (const auto& d : descriptors)
    if (d.immutable) names.push_back(d.name);
  return names;
}

double TabularDataset::PositiveRate() const {
  if (labels.size() == 0) return 0.0;
  return labels.cast<double>().mean();
}

TabularDataset TabularDataset::Subset(const std::vector<Eigen::Index>& rows) const {
  TabularDataset out;
  out.name = name;
  out.descriptors = descriptors;
  out.normalized = normalized;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), dim());
  out.labels.resize(static_cast<Eigen::Index>(rows.size()));
  const bool has_latent = latent_truth.rows() == size();
  if (has_latent) out.latent_truth.resize(static_cast<Eigen::Index>(rows.size()), 2);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    out.features.row(r) = features.row(rows[i]);
    out.labels(r) = labels(rows[i]);
    if (has_latent) out.latent_truth.row(r) = latent_truth.row(rows[i]);
  }
  return out;
}

std::vector<bool> MaskForNames(const std::vector<FeatureDescriptor>& descriptors,
                               const std::vector<std::string>& names) {
  std::vector<bool> mask(descriptors.size(), false);
  for (const std::string& name : names) {
    auto it = std::find_if(descriptors.begin(), descriptors.end(),
                           [&](const FeatureDescriptor& d) { return d.name == name; });
    if (it == descriptors.end())
      throw ConfigError("unknown feature '" + name + "' in immutable list");
    mask[static_cast<std::size_t>(it - descriptors.begin())] = true;
  }
  return mask;
}

Normalizer Normalizer::Fit(const Eigen::MatrixXd& features) {
  if (features.rows() == 0) throw ConfigError("cannot fit normalizer on empty data");
  Normalizer n;
  n.min_ = features.colwise().minCoeff().transpose();
  n.max_ = features.colwise().maxCoeff().transpose();
  return n;
}

Eigen::MatrixXd Normalizer::Apply(const Eigen::MatrixXd& features,
                                  std::size_t* clamped) const {
  if (features.cols() != min_.size())
    throw ShapeError("normalizer fitted on " + std::to_string(min_.size()) +
                     " features, got " + std::to_string(features.cols()));
  Eigen::MatrixXd out(features.rows(), features.cols());
  std::size_t count = 0;
  for (Eigen::Index j = 0; j < features.cols(); ++j) {
    const double range = max_(j) - min_(j);
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
      double v = range > 0 ? (features(i, j) - min_(j)) / range : 0.0;
      if (v < 0.0 || v > 1.0) {
        v = std::clamp(v, 0.0, 1.0);
        ++count;
      }
      out(i, j) = v;
    }
  }
  if (clamped) *clamped = count;
  return out;
}

Eigen::MatrixXd Normalizer::Invert(const Eigen::MatrixXd& normalized) const {
  if (normalized.cols() != min_.size()) throw ShapeError("normalizer width mismatch");
  Eigen::MatrixXd out = normalized;
  for (Eigen::Index j = 0; j < out.cols(); ++j)
    out.col(j) = out.col(j).array() * (max_(j) - min_(j)) + min_(j);
  return out;
}

SplitResult Split(const TabularDataset& raw, std::uint64_t seed, double train_fraction) {
  const Eigen::Index n = raw.size();
  if (n < 4) throw ConfigError("split needs at least 4 rows, got " + std::to_string(n));
  if (raw.normalized) throw ConfigError("split expects an unnormalized dataset");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng rng(DeriveSeed(seed, "split"));
  // Fisher-Yates with our own index draws (std::shuffle is not portable).
  for (std::size_t i = order.size() - 1; i > 0; --i)
    std::swap(order[i], order[rng.UniformIndex(i + 1)]);
  const auto n_train = static_cast<std::size_t>(
      std::llround(train_fraction * static_cast<double>(n)));
  std::vector<Eigen::Index> train_rows(order.begin(), order.begin() + n_train);
  std::vector<Eigen::Index> test_rows(order.begin() + n_train, order.end());
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(test_rows.begin(), test_rows.end());

  SplitResult result;
  result.train = raw.Subset(train_rows);
  result.test = raw.Subset(test_rows);
  result.normalizer = Normalizer::Fit(result.train.features);
  result.train.features = result.normalizer.Apply(result.train.features,
                                                  &result.train.clamped_values);
  result.test.features = result.normalizer.Apply(result.test.features,
                                                 &result.test.clamped_values);
  for (TabularDataset* part : {&result.train, &result.test}) {
    part->normalized = true;
    for (std::size_t j = 0; j < part->descriptors.size(); ++j) {
      part->descriptors[j].min = result.normalizer.min()(static_cast<Eigen::Index>(j));
      part->descriptors[j].max = result.normalizer.max()(static_cast<Eigen::Index>(j));
    }
  }
  return result;
}

Eigen::Vector3d SurfacePoint(const Eigen::Vector2d& z) {
  return {z(0), z(1), 0.25 * std::sin(z(0))};
}

int SurfaceLabel(const Eigen::Vector2d& z, double boundary_coefficient) {
  return z(1) - boundary_coefficient * z(0) * z(0) > 0 ? 1 : 0;
}

TabularDataset GenerateSurface(const SurfaceSpec& spec) {
  if (spec.hole_radius < 0) throw ConfigError("hole radius must be non-negative");
  if (!(spec.noise > 0)) throw ConfigError("noise scale must be positive");
  if (!(spec.domain_high > spec.domain_low)) throw ConfigError("empty surface domain");
  Rng rng(DeriveSeed(spec.seed, "surface"));
  TabularDataset out;
  out.name = "surface";
  out.features.resize(static_cast<Eigen::Index>(spec.samples), 3);
  out.labels.resize(static_cast<Eigen::Index>(spec.samples));
  out.latent_truth.resize(static_cast<Eigen::Index>(spec.samples), 2);
  Eigen::Index filled = 0;
  while (filled < static_cast<Eigen::Index>(spec.samples)) {
    const Eigen::Vector2d z(rng.Uniform(spec.domain_low, spec.domain_high),
                            rng.Uniform(spec.domain_low, spec.domain_high));
    if ((z - spec.hole_center).norm() < spec.hole_radius) continue;
    Eigen::Vector3d x = SurfacePoint(z);
    for (int k = 0; k < 3; ++k) x(k) += spec.noise * rng.Normal();
    out.features.row(filled) = x.transpose();
    out.labels(filled) = SurfaceLabel(z, spec.boundary_coefficient);
    out.latent_truth.row(filled) = z.transpose();
    ++filled;
  }
  out.descriptors = {{"x1", FeatureKind::kContinuous, false, false},
                     {"x2", FeatureKind::kContinuous, false, false},
                     {"x3", FeatureKind::kContinuous, false, false}};
  return out;
}

TabularDataset LoadAdult(const std::vector<std::filesystem::path>& paths) {
  if (paths.empty()) throw ConfigError("no Adult input files given");
  static const std::set<std::string> kMarried = {"Married-civ-spouse", "Married-AF-spouse",
                                                 "Married-spouse-absent"};
  static const std::set<std::string> kMarital = {
      "Married-civ-spouse", "Married-AF-spouse", "Married-spouse-absent", "Divorced",
      "Never-married",      "Separated",         "Widowed"};
  static const std::set<std::string> kRelationship = {
      "Husband", "Wife", "Own-child", "Not-in-family", "Other-relative", "Unmarried"};
  static const std::set<std::string> kRace = {"White", "Black", "Asian-Pac-Islander",
                                              "Amer-Indian-Eskimo", "Other"};
  static const std::set<std::string> kSpecialistOccupations = {"Exec-managerial",
                                                               "Prof-specialty"};

  std::vector<std::array<double, 13>> rows;
  std::vector<int> labels;
  std::size_t rejected = 0;
  for (const auto& path : paths) {
    std::ifstream in = OpenOrThrow(path);
    std::string line;
    std::map<std::string, std::size_t> column;
    bool header_resolved = false;
    while (std::getline(in, line)) {
      const std::string_view trimmed = Trim(line);
      if (trimmed.empty() || trimmed.front() == '|') continue;
      std::vector<std::string> fields = SplitCsvLine(trimmed);
      if (!header_resolved) {
        header_resolved = true;
        if (!ParseNumber(fields[0])) {
          for (std::size_t i = 0; i < fields.size(); ++i)
            column[CanonicalColumn(fields[i])] = i;
          if (column.count("class") && !column.count("income"))
            column["income"] = column["class"];
          for (const auto& name : kAdultColumns)
            if (name != "education" && !column.count(name))
              throw SchemaError("Adult file '" + path.string() + "' lacks column '" +
                                name + "'");
          continue;
        }
        for (std::size_t i = 0; i < kAdultColumns.size(); ++i)
          column[kAdultColumns[i]] = i;
      }
      auto field = [&](const std::string& name) -> const std::string& {
        static const std::string kEmpty;
        const std::size_t i = column.at(name);
        return i < fields.size() ? fields[i] : kEmpty;
      };
      const auto age = ParseNumber(field("age"));
      const auto fnlwgt = ParseNumber(field("fnlwgt"));
      const auto edu = ParseNumber(field("education-num"));
      const auto gain = ParseNumber(field("capital-gain"));
      const auto loss = ParseNumber(field("capital-loss"));
      const auto hours = ParseNumber(field("hours-per-week"));
      const std::string& marital = field("marital-status");
      const std::string& relationship = field("relationship");
      const std::string& race = field("race");
      const std::string& sex = field("sex");
      std::string income = field("income");
      if (!income.empty() && income.back() == '.') income.pop_back();
      if (!age || !fnlwgt || !edu || !gain || !loss || !hours || *gain < 0 || *loss < 0 ||
          !kMarital.count(marital) || !kRelationship.count(relationship) ||
          !kRace.count(race) || (sex != "Male" && sex != "Female") ||
          (income != ">50K" && income != "<=50K")) {
        ++rejected;
        continue;
      }
      // Unknown ("?") workclass, occupation and country fall into the
      // complementary aggregate.
      rows.push_back({*age, *fnlwgt, *edu, std::log1p(*gain), std::log1p(*loss), *hours,
                      field("workclass") == "Private" ? 1.0 : 0.0,
                      kMarried.count(marital) ? 0.0 : 1.0,
                      kSpecialistOccupations.count(field("occupation")) ? 0.0 : 1.0,
                      relationship == "Husband" ? 0.0 : 1.0, race == "White" ? 1.0 : 0.0,
                      sex == "Male" ? 1.0 : 0.0,
                      field("native-country") == "United-States" ? 1.0 : 0.0});
      labels.push_back(income == ">50K" ? 1 : 0);
    }
  }
  TabularDataset out;
  out.name = "adult";
  out.rejected_rows = rejected;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), 13);
  out.labels.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (int j = 0; j < 13; ++j) out.features(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
    out.labels(static_cast<Eigen::Index>(i)) = labels[i];
  }
  using K = FeatureKind;
  out.descriptors = {
      {"age", K::kContinuous, true, false},
      {"fnlwgt", K::kContinuous, false, false},
      {"education_num", K::kContinuous, false, false},
      {"capital_gain", K::kContinuous, false, true},
      {"capital_loss", K::kContinuous, false, true},
      {"hours_per_week", K::kContinuous, false, false},
      {"workclass_private", K::kBinary, false, false},
      {"marital_not_married", K::kBinary, false, false},
      {"occupation_other", K::kBinary, false, false},
      {"relationship_not_husband", K::kBinary, false, false},
      {"race_white", K::kBinary, true, false},
      {"sex_male", K::kBinary, true, false},
      {"native_us", K::kBinary, false, false},
  };
  return out;
}

TabularDataset LoadGmc(const std::filesystem::path& path, bool invert_label) {
  static const std::vector<std::pair<std::string, std::string>> kFeatures = {
      {"revolvingutilizationofunsecuredlines", "revolving_utilization"},
      {"age", "age"},
      {"numberoftime30-59dayspastduenotworse", "late_30_59"},
      {"debtratio", "debt_ratio"},
      {"monthlyincome", "monthly_income"},
      {"numberofopencreditlinesandloans", "open_credit_lines"},
      {"numberoftimes90dayslate", "late_90"},
      {"numberrealestateloansorlines", "real_estate_loans"},
      {"numberoftime60-89dayspastduenotworse", "late_60_89"},
      {"numberofdependents", "dependents"},
  };
  const std::string kLabel = "seriousdlqin2yrs";

  std::ifstream in = OpenOrThrow(path);
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("GMC file is empty");
  std::map<std::string, std::size_t> column;
  {
    const auto header = SplitCsvLine(line);
    for (std::size_t i = 0; i < header.size(); ++i) column[CanonicalColumn(header[i])] = i;
  }
  if (!column.count(kLabel)) throw SchemaError("GMC file lacks column 'SeriousDlqin2yrs'");
  for (const auto& [raw, _] : kFeatures)
    if (!column.count(raw)) throw SchemaError("GMC file lacks column '" + raw + "'");

  std::vector<std::array<double, 10>> rows;
  std::vector<int> labels;
  std::size_t rejected = 0;
  while (std::getline(in, line)) {
    if (Trim(line).empty()) continue;
    const auto fields = SplitCsvLine(line);
    auto number = [&](const std::string& name) -> std::optional<double> {
      const std::size_t i = column.at(name);
      if (i >= fields.size()) return std::nullopt;
      return ParseNumber(fields[i]);
    };
    std::array<double, 10> row{};
    bool ok = true;
    for (std::size_t j = 0; j < kFeatures.size() && ok; ++j) {
      const auto v = number(kFeatures[j].first);
      if (!v) ok = false;
      else row[j] = *v;
    }
    const auto label = number(kLabel);
    if (!ok || !label || (*label != 0.0 && *label != 1.0) || row[3] < 0) {
      ++rejected;
      continue;
    }
    row[3] = std::log1p(row[3]);
    rows.push_back(row);
    const int distress = static_cast<int>(*label);
    labels.push_back(invert_label ? 1 - distress : distress);
  }
  TabularDataset out;
  out.name = "gmc";
  out.rejected_rows = rejected;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), 10);
  out.labels.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (int j = 0; j < 10; ++j) out.features(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
    out.labels(static_cast<Eigen::Index>(i)) = labels[i];
  }
  for (const auto& [raw, name] : kFeatures)
    out.descriptors.push_back({name, FeatureKind::kContinuous, name == "age",
                               name == "debt_ratio"});
  return out;
}

void SaveDataset(const TabularDataset& dataset, const std::filesystem::path& path) {
  Archive archive;
  archive.meta()["kind"] = "dataset";
  archive.meta()["name"] = dataset.name;
  archive.meta()["normalized"] = dataset.normalized;
  archive.meta()["rejected_rows"] = dataset.rejected_rows;
  archive.meta()["clamped_values"] = dataset.clamped_values;
  nlohmann::json features = nlohmann::json::array();
  for (const auto& d : dataset.descriptors)
    features.push_back({{"name", d.name},
                        {"kind", d.kind == FeatureKind::kBinary ? "binary" : "continuous"},
                        {"immutable", d.immutable},
                        {"log_transformed", d.log_transformed},
                        {"min", d.min},
                        {"max", d.max}});
  archive.meta()["features"] = std::move(features);
  archive.PutMatrix("features", dataset.features);
  archive.PutMatrix("labels", dataset.labels.cast<double>());
  if (dataset.latent_truth.size() > 0) archive.PutMatrix("latent_truth", dataset.latent_truth);
  archive.Save(path);
}

TabularDataset LoadDataset(const std::filesystem::path& path) {
  const Archive archive = Archive::Load(path);
  if (archive.meta().value("kind", "") != "dataset")
    throw SchemaError("'" + path.string() + "' is not a dataset file");
  TabularDataset out;
  out.name = archive.meta().at("name").get<std::string>();
  out.normalized = archive.meta().at("normalized").get<bool>();
  out.rejected_rows = archive.meta().at("rejected_rows").get<std::size_t>();
  out.clamped_values = archive.meta().at("clamped_values").get<std::size_t>();
  for (const auto& f : archive.meta().at("features"))
    out.descriptors.push_back({f.at("name").get<std::string>(),
                               f.at("kind") == "binary" ? FeatureKind::kBinary
                                                        : FeatureKind::kContinuous,
                               f.at("immutable").get<bool>(),
                               f.at("log_transformed").get<bool>(), f.at("min").get<double>(),
                               f.at("max").get<double>()});
  out.features = archive.GetMatrix("features");
  out.labels = archive.GetVector("labels").cast<int>();
  if (archive.HasMatrix("latent_truth")) out.latent_truth = archive.GetMatrix("latent_truth");
  if (static_cast<std::size_t>(out.features.cols()) != out.descriptors.size())
    throw SchemaError("dataset schema does not match feature matrix width");
  return out;
}

}  // namespace riemce::data
