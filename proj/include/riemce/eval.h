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

#ifndef RIEMCE_EVAL_H_
#define RIEMCE_EVAL_H_

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "riemce/counterfactual.h"
#include "riemce/models.h"

namespace riemce::eval {

// A coordinate counts as changed when |delta| exceeds this (normalized units).
inline constexpr double kChangeTolerance = 1e-5;

// Exact brute-force nearest-training-point distance. Rows of `train` are
// samples. Throws ConfigError for an empty training matrix.
class NearestNeighbor {
 public:
  explicit NearestNeighbor(const Eigen::MatrixXd& train);
  double Distance(const Eigen::VectorXd& x) const;
  // One distance per query row; per-query work is independent of
  // `parallelism`, so results are identical for every thread count.
  Eigen::VectorXd Distances(const Eigen::MatrixXd& queries, int parallelism = 1) const;

 private:
  Eigen::MatrixXd samples_;  // D x N, one training point per column
};

double RealismDistance(const Eigen::VectorXd& x, const Eigen::MatrixXd& train);

struct Closeness {
  double l0 = 0, l1 = 0, l2 = 0, linf = 0;
};
Closeness ComputeCloseness(const Eigen::VectorXd& counterfactual, const Eigen::VectorXd& factual,
                           double tolerance = kChangeTolerance);

struct Validity {
  bool flipped = false;
  double confidence = 0.0;  // probability of the target class
};
Validity ComputeValidity(const models::ClassifierModel& clf, const Eigen::VectorXd& x, int target);

int ViolationCount(const Eigen::VectorXd& counterfactual, const Eigen::VectorXd& factual,
                   const std::vector<bool>& immutable, double tolerance = kChangeTolerance);

struct CeMetrics {
  bool completed = false;  // false when generation failed before any step
  double realism = 0.0;    // L_D
  Closeness closeness;
  Validity validity;
  int violations = 0;
};

struct EvalContext {
  const models::ClassifierModel* classifier = nullptr;
  const NearestNeighbor* neighbors = nullptr;
  std::vector<bool> immutable;
  int target = 1;
  double tolerance = kChangeTolerance;
  int parallelism = 1;
};

// Metrics of every trajectory's final counterfactual.
std::vector<CeMetrics> EvaluateTrajectories(const std::vector<counterfactual::CeTrajectory>& runs,
                                            const EvalContext& context);

// Pairwise (cascade) summation; the reduction order depends only on size.
double PairwiseSum(std::span<const double> values);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
  std::size_t count = 0;
};
MeanStd Summarize(std::span<const double> values);

struct ReportRow {
  int n_iter = 0;
  bool constraints = false;
  std::string optimizer;
  std::string seed;  // a seed value, or "pooled"
  MeanStd realism, l0, l1, l2, linf;  // over flipped CEs
  MeanStd confidence;                 // over completed CEs
  double flip_ratio = 0.0;            // over all trajectories
  double violation = 0.0;             // mean count over completed CEs
  std::size_t total = 0, flipped = 0, failed = 0;
};

ReportRow SummarizeCell(const std::vector<CeMetrics>& metrics, int n_iter, bool constraints,
                        const std::string& optimizer, const std::string& seed);

std::vector<std::string> ReportColumns();
void WriteReportCsv(const std::filesystem::path& path, const std::vector<ReportRow>& rows);
void WriteReportJson(const std::filesystem::path& path, const std::vector<ReportRow>& rows);

struct CurvePoint {
  double threshold = 0.0;
  double ctr = 0.0;         // fraction of trajectories reaching the threshold
  double realism = 0.0;     // mean L_D over first hits (NaN if none)
  double l2 = 0.0;          // mean L2 to the factual over first hits
  double iterations = 0.0;  // mean first-hit step
};

// Throws ConfigError for an empty threshold list.
std::vector<CurvePoint> CtrCurve(const std::vector<counterfactual::CeTrajectory>& runs,
                                 const std::vector<double>& thresholds,
                                 const NearestNeighbor& neighbors, int parallelism = 1);
void WriteCurveCsv(const std::filesystem::path& path, const std::vector<CurvePoint>& curve);

// Per-step plotting table: index, step, confidence, l_d, l2.
void WriteTrajectorySummaryCsv(const std::filesystem::path& path,
                               const std::vector<counterfactual::CeTrajectory>& runs,
                               const NearestNeighbor& neighbors);

}  // namespace riemce::eval

#endif  // RIEMCE_EVAL_H_
