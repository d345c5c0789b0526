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

#include "riemce/eval.h"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "riemce/errors.h"
#include "riemce/parallel.h"

namespace riemce::eval {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::ofstream OpenForWrite(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << std::setprecision(10);
  return out;
}

double MeanOrNaN(const std::vector<double>& values) {
  return values.empty() ? kNaN : PairwiseSum(values) / static_cast<double>(values.size());
}

}  // namespace

NearestNeighbor::NearestNeighbor(const Eigen::MatrixXd& train) : samples_(train.transpose()) {
  if (train.rows() == 0) throw ConfigError("realism distance needs a non-empty training set");
}

double NearestNeighbor::Distance(const Eigen::VectorXd& x) const {
  if (x.size() != samples_.rows())
    throw ShapeError("query dim " + std::to_string(x.size()) + " != training dim " +
                     std::to_string(samples_.rows()));
  const Eigen::Index dim = samples_.rows();
  const double* data = samples_.data();
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < samples_.cols(); ++i, data += dim) {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < dim && sum < best; ++j) {
      const double d = x(j) - data[j];
      sum += d * d;
    }
    if (sum < best) best = sum;
  }
  return std::sqrt(best);
}

Eigen::VectorXd NearestNeighbor::Distances(const Eigen::MatrixXd& queries, int parallelism) const {
  Eigen::VectorXd out(queries.rows());
  ParallelFor(static_cast<std::size_t>(queries.rows()), parallelism, [&](std::size_t i) {
    const auto r = static_cast<Eigen::Index>(i);
    out(r) = Distance(queries.row(r).transpose());
  });
  return out;
}

double RealismDistance(const Eigen::VectorXd& x, const Eigen::MatrixXd& train) {
  return NearestNeighbor(train).Distance(x);
}

Closeness ComputeCloseness(const Eigen::VectorXd& counterfactual, const Eigen::VectorXd& factual,
                           double tolerance) {
  if (counterfactual.size() != factual.size()) throw ShapeError("closeness dim mismatch");
  const Eigen::ArrayXd delta = (counterfactual - factual).array().abs();
  return {static_cast<double>((delta > tolerance).count()), delta.sum(),
          std::sqrt(delta.square().sum()), delta.size() ? delta.maxCoeff() : 0.0};
}

Validity ComputeValidity(const models::ClassifierModel& clf, const Eigen::VectorXd& x,
                         int target) {
  const double c = clf.Classify(x);
  const double confidence = target == 1 ? c : 1.0 - c;
  return {confidence >= 0.5, confidence};
}

int ViolationCount(const Eigen::VectorXd& counterfactual, const Eigen::VectorXd& factual,
                   const std::vector<bool>& immutable, double tolerance) {
  if (static_cast<Eigen::Index>(immutable.size()) != factual.size())
    throw ShapeError("immutable mask has " + std::to_string(immutable.size()) +
                     " entries for dim " + std::to_string(factual.size()));
  int count = 0;
  for (Eigen::Index j = 0; j < factual.size(); ++j)
    if (immutable[static_cast<std::size_t>(j)] &&
        std::abs(counterfactual(j) - factual(j)) > tolerance)
      ++count;
  return count;
}

std::vector<CeMetrics> EvaluateTrajectories(const std::vector<counterfactual::CeTrajectory>& runs,
                                            const EvalContext& context) {
  if (!context.classifier || !context.neighbors)
    throw ConfigError("evaluation needs a classifier and training data");
  std::vector<CeMetrics> out(runs.size());
  ParallelFor(runs.size(), context.parallelism, [&](std::size_t i) {
    const counterfactual::CeTrajectory& run = runs[i];
    if (run.steps.empty()) return;
    const Eigen::VectorXd& x = run.steps.back().x_hat;
    CeMetrics& m = out[i];
    m.completed = true;
    m.realism = context.neighbors->Distance(x);
    m.closeness = ComputeCloseness(x, run.factual, context.tolerance);
    m.validity = ComputeValidity(*context.classifier, x, context.target);
    m.violations = context.immutable.empty()
                       ? 0
                       : ViolationCount(x, run.factual, context.immutable, context.tolerance);
  });
  return out;
}

double PairwiseSum(std::span<const double> values) {
  constexpr std::size_t kBlock = 8;
  if (values.size() <= kBlock) {
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum;
  }
  const std::size_t half = values.size() / 2;
  return PairwiseSum(values.first(half)) + PairwiseSum(values.subspan(half));
}

MeanStd Summarize(std::span<const double> values) {
  MeanStd out;
  out.count = values.size();
  if (values.empty()) {
    out.mean = out.std = kNaN;
    return out;
  }
  const double n = static_cast<double>(values.size());
  out.mean = PairwiseSum(values) / n;
  std::vector<double> squared(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    squared[i] = (values[i] - out.mean) * (values[i] - out.mean);
  out.std = std::sqrt(PairwiseSum(squared) / n);
  return out;
}

ReportRow SummarizeCell(const std::vector<CeMetrics>& metrics, int n_iter, bool constraints,
                        const std::string& optimizer, const std::string& seed) {
  ReportRow row;
  row.n_iter = n_iter;
  row.constraints = constraints;
  row.optimizer = optimizer;
  row.seed = seed;
  row.total = metrics.size();
  std::vector<double> realism, l0, l1, l2, linf, confidence, violations;
  for (const CeMetrics& m : metrics) {
    if (!m.completed) {
      ++row.failed;
      continue;
    }
    confidence.push_back(m.validity.confidence);
    violations.push_back(m.violations);
    if (!m.validity.flipped) continue;
    ++row.flipped;
    realism.push_back(m.realism);
    l0.push_back(m.closeness.l0);
    l1.push_back(m.closeness.l1);
    l2.push_back(m.closeness.l2);
    linf.push_back(m.closeness.linf);
  }
  row.realism = Summarize(realism);
  row.l0 = Summarize(l0);
  row.l1 = Summarize(l1);
  row.l2 = Summarize(l2);
  row.linf = Summarize(linf);
  row.confidence = Summarize(confidence);
  row.flip_ratio =
      row.total ? static_cast<double>(row.flipped) / static_cast<double>(row.total) : kNaN;
  row.violation = MeanOrNaN(violations);
  return row;
}

std::vector<std::string> ReportColumns() {
  return {"n_iter",     "constraints", "optimizer",  "L_D_mean",  "L_D_std",
          "L0_mean",    "L0_std",      "L1_mean",    "L1_std",    "L2_mean",
          "L2_std",     "Linf_mean",   "Linf_std",   "conf_mean", "conf_std",
          "FR",         "violation",   "seed",       "n_ce",      "n_flipped",
          "n_failed"};
}

void WriteReportCsv(const std::filesystem::path& path, const std::vector<ReportRow>& rows) {
  std::ofstream out = OpenForWrite(path);
  const auto columns = ReportColumns();
  for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << columns[i];
  out << "\n";
  for (const ReportRow& r : rows) {
    out << r.n_iter << "," << (r.constraints ? "yes" : "no") << "," << r.optimizer;
    for (const MeanStd* m : {&r.realism, &r.l0, &r.l1, &r.l2, &r.linf, &r.confidence})
      out << "," << m->mean << "," << m->std;
    out << "," << r.flip_ratio << "," << r.violation << "," << r.seed << "," << r.total << ","
        << r.flipped << "," << r.failed << "\n";
  }
}

void WriteReportJson(const std::filesystem::path& path, const std::vector<ReportRow>& rows) {
  // JSON has no NaN; empty groups become null.
  auto number = [](double v) { return std::isnan(v) ? nlohmann::json() : nlohmann::json(v); };
  auto stat = [&](const MeanStd& m) {
    return nlohmann::json{{"mean", number(m.mean)}, {"std", number(m.std)}, {"count", m.count}};
  };
  nlohmann::json table = nlohmann::json::array();
  for (const ReportRow& r : rows)
    table.push_back({{"n_iter", r.n_iter},
                     {"constraints", r.constraints},
                     {"optimizer", r.optimizer},
                     {"seed", r.seed},
                     {"L_D", stat(r.realism)},
                     {"L0", stat(r.l0)},
                     {"L1", stat(r.l1)},
                     {"L2", stat(r.l2)},
                     {"Linf", stat(r.linf)},
                     {"confidence", stat(r.confidence)},
                     {"FR", number(r.flip_ratio)},
                     {"violation", number(r.violation)},
                     {"n_ce", r.total},
                     {"n_flipped", r.flipped},
                     {"n_failed", r.failed}});
  std::ofstream out = OpenForWrite(path);
  out << table.dump(2) << "\n";
}

std::vector<CurvePoint> CtrCurve(const std::vector<counterfactual::CeTrajectory>& runs,
                                 const std::vector<double>& thresholds,
                                 const NearestNeighbor& neighbors, int parallelism) {
  if (thresholds.empty()) throw ConfigError("CTR curve needs at least one threshold");
  std::vector<CurvePoint> curve;
  for (double tau : thresholds) {
    std::vector<std::optional<counterfactual::ThresholdHit>> hits(runs.size());
    std::vector<double> realism(runs.size(), kNaN);
    ParallelFor(runs.size(), parallelism, [&](std::size_t i) {
      hits[i] = counterfactual::ExtractAtThreshold(runs[i], tau);
      if (hits[i]) realism[i] = neighbors.Distance(hits[i]->counterfactual);
    });
    std::vector<double> l_d, l2, iters;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      if (!hits[i]) continue;
      l_d.push_back(realism[i]);
      l2.push_back((hits[i]->counterfactual - runs[i].factual).norm());
      iters.push_back(static_cast<double>(hits[i]->step));
    }
    CurvePoint p;
    p.threshold = tau;
    p.ctr = runs.empty() ? kNaN
                         : static_cast<double>(l_d.size()) / static_cast<double>(runs.size());
    p.realism = MeanOrNaN(l_d);
    p.l2 = MeanOrNaN(l2);
    p.iterations = MeanOrNaN(iters);
    curve.push_back(p);
  }
  return curve;
}

void WriteCurveCsv(const std::filesystem::path& path, const std::vector<CurvePoint>& curve) {
  std::ofstream out = OpenForWrite(path);
  out << "threshold,ctr,l_d,l2,iters\n";
  for (const CurvePoint& p : curve)
    out << p.threshold << "," << p.ctr << "," << p.realism << "," << p.l2 << "," << p.iterations
        << "\n";
}

void WriteTrajectorySummaryCsv(const std::filesystem::path& path,
                               const std::vector<counterfactual::CeTrajectory>& runs,
                               const NearestNeighbor& neighbors) {
  std::ofstream out = OpenForWrite(path);
  out << "index,step,confidence,l_d,l2\n";
  for (const auto& run : runs)
    for (std::size_t t = 0; t < run.steps.size(); ++t) {
      const auto& s = run.steps[t];
      out << run.index << "," << t << "," << s.confidence << "," << neighbors.Distance(s.x_hat)
          << "," << (s.x_hat - run.factual).norm() << "\n";
    }
}

}  // namespace riemce::eval
