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

// Acceptance suite. Prints one line per criterion:
//
//   criterion <n>: PASS|FAIL|SKIP  <measurements>
//
// and exits nonzero when any criterion fails. Trained models, trajectories
// and reports are cached under --work so reruns only redo what changed.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "riemce/checkpoint.h"
#include "riemce/config.h"
#include "riemce/counterfactual.h"
#include "riemce/errors.h"
#include "riemce/eval.h"
#include "riemce/geometry.h"
#include "riemce/pipeline.h"
#include "riemce/rng.h"
#include "toy_models.h"

namespace {

namespace fs = std::filesystem;
using namespace riemce;

enum class Status { kPass, kFail, kSkip };

struct Outcome {
  Status status = Status::kFail;
  std::string detail;
};

std::string Fmt(double v, int precision = 4) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

std::string Line(int criterion, const Outcome& o) {
  const char* status = o.status == Status::kPass ? "PASS" : o.status == Status::kFail ? "FAIL" : "SKIP";
  return "criterion " + std::to_string(criterion) + ": " + status + "  " + o.detail;
}

Outcome Verdict(bool pass, std::string detail) {
  return {pass ? Status::kPass : Status::kFail, std::move(detail)};
}

double Seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// ---------------------------------------------------------------------------
// Models are retrained only when the serialized configuration changes.

void EnsureModels(const RunConfig& config, std::uint64_t seed) {
  const fs::path dir = pipeline::SeedDir(config, seed);
  const fs::path stamp = dir / "models.cfg";
  const std::string text = SerializeConfig(config);
  if (fs::exists(dir / "classifier.ckpt") && fs::exists(dir / "vae.ckpt") && fs::exists(stamp)) {
    std::ifstream in(stamp);
    const std::string cached((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (cached == text) return;
  }
  std::cerr << "[acceptance] training " << config.dataset << " seed " << seed << "\n";
  pipeline::TrainClassifierStage(config, seed);
  pipeline::TrainVaeStage(config, seed);
  std::ofstream(stamp) << text;
}

// ---------------------------------------------------------------------------
// 1. Finite-difference Jacobians of the trained production networks.

double RelativeError(const Eigen::MatrixXd& exact, const Eigen::MatrixXd& numeric) {
  return (exact - numeric).norm() / std::max(exact.norm(), 1e-300);
}

Eigen::MatrixXd CentralDifference(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                  const Eigen::VectorXd& x, double h) {
  const Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd jac(f0.size(), x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    Eigen::VectorXd up = x, down = x;
    up(j) += h;
    down(j) -= h;
    jac.col(j) = (f(up) - f(down)) / (2 * h);
  }
  return jac;
}

Outcome JacobianSuite(const RunConfig& adult, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  const fs::path dir = pipeline::SeedDir(adult, seed);
  const auto clf = models::LoadClassifier(dir / "classifier.ckpt");
  const auto vae = models::LoadVae(dir / "vae.ckpt");
  const auto test = data::LoadDataset(dir / "test.ds");
  Rng rng(DeriveSeed(seed, "acceptance/jacobian"));
  constexpr double kStep = 1e-5;
  double worst_clf = 0, worst_mean = 0, worst_sigma = 0;
  for (int i = 0; i < 100; ++i) {
    const Eigen::VectorXd x =
        test.features.row(static_cast<Eigen::Index>(rng.UniformIndex(test.size()))).transpose();
    // Representation rows plus the logit gradient.
    auto classifier = [&](const Eigen::VectorXd& v) {
      Eigen::VectorXd out(clf.representation_dim() + 1);
      out << clf.Representation(v), clf.Logit(v);
      return out;
    };
    Eigen::MatrixXd exact(clf.representation_dim() + 1, x.size());
    exact.topRows(clf.representation_dim()) = clf.RepresentationJacobian(x);
    exact.bottomRows(1) = clf.weights().transpose() * exact.topRows(clf.representation_dim());
    worst_clf = std::max(worst_clf, RelativeError(exact, CentralDifference(classifier, x, kStep)));

    Eigen::VectorXd z = vae.Encode(x);
    for (Eigen::Index j = 0; j < z.size(); ++j) z(j) += rng.Normal(0.0, 0.1);
    worst_mean = std::max(
        worst_mean,
        RelativeError(vae.DecoderMeanJacobian(z),
                      CentralDifference([&](const Eigen::VectorXd& v) { return vae.DecodeMean(v); },
                                        z, kStep)));
    worst_sigma = std::max(
        worst_sigma,
        RelativeError(vae.DecoderSigmaJacobian(z),
                      CentralDifference([&](const Eigen::VectorXd& v) { return vae.DecoderSigma(v); },
                                        z, kStep)));
  }
  const double elapsed = Seconds(start);
  const double worst = std::max({worst_clf, worst_mean, worst_sigma});
  return Verdict(worst <= 1e-4 && elapsed < 60,
                 "max rel err classifier " + Fmt(worst_clf, 3) + ", decoder mean " +
                     Fmt(worst_mean, 3) + ", RBF sigma " + Fmt(worst_sigma, 3) +
                     " (100 points each, Adult seed " + std::to_string(seed) + ", " +
                     Fmt(elapsed, 3) + " s)");
}

// ---------------------------------------------------------------------------
// 2. Pullback metric against a Monte-Carlo estimate over decoder noise.

Outcome MonteCarloPullback() {
  const auto start = std::chrono::steady_clock::now();
  double worst = 0;
  std::string per_model;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const models::VaeModel vae = testing::ToyVae(1000 + seed);
    const Eigen::VectorXd z = vae.variance().centers().col(0) + Eigen::Vector2d(1.0, 0.0);
    // g_eps(z) = mu(z) + sigma(z) * eps; its Jacobian comes from finite
    // differences so the oracle shares no derivative code with the library.
    const Eigen::MatrixXd mean_jac = CentralDifference(
        [&](const Eigen::VectorXd& v) { return vae.DecodeMean(v); }, z, 1e-6);
    const Eigen::MatrixXd sigma_jac = CentralDifference(
        [&](const Eigen::VectorXd& v) { return vae.DecoderSigma(v); }, z, 1e-6);
    Rng rng(DeriveSeed(seed, "acceptance/monte-carlo"));
    constexpr int kSamples = 100000;
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(z.size(), z.size());
    Eigen::VectorXd eps(mean_jac.rows());
    for (int s = 0; s < kSamples; ++s) {
      for (Eigen::Index j = 0; j < eps.size(); ++j) eps(j) = rng.Normal();
      const Eigen::MatrixXd jac = mean_jac + eps.asDiagonal() * sigma_jac;
      sum.noalias() += jac.transpose() * jac;
    }
    const Eigen::MatrixXd estimate = sum / kSamples;
    const double err = RelativeError(estimate, geometry::PullbackMetric(vae, z).matrix);
    worst = std::max(worst, err);
    per_model += (seed ? ", " : "") + Fmt(err, 3);
  }
  const double elapsed = Seconds(start);
  return Verdict(worst <= 0.02 && elapsed < 300,
                 "rel Frobenius err per toy VAE [" + per_model + "], 1e5 samples each, " +
                     Fmt(elapsed, 3) + " s");
}

// ---------------------------------------------------------------------------
// 3. Enhanced metric reductions.

Outcome EnhancedReductions() {
  bool identity_exact = true;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const models::VaeModel vae = testing::ToyVae(2000 + seed);
    const models::ClassifierModel identity =
        testing::IdentityClassifier(static_cast<int>(vae.ambient_dim()), Eigen::VectorXd::Ones(vae.ambient_dim()));
    Rng rng(seed);
    for (int i = 0; i < 20; ++i) {
      const Eigen::Vector2d z(rng.Normal(), rng.Normal());
      identity_exact &= geometry::EnhancedMetric(vae, identity, z).matrix ==
                        geometry::PullbackMetric(vae, z).matrix;
    }
  }
  double worst_linear = 0;
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd a(6, 3), b(4, 6);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.Normal();
    for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = rng.Normal();
    const models::VaeModel vae = testing::LinearVae(a);
    const models::ClassifierModel clf = testing::LinearClassifier(b, Eigen::VectorXd::Ones(4));
    const Eigen::Vector3d z(rng.Normal(), rng.Normal(), rng.Normal());
    const Eigen::MatrixXd expected = a.transpose() * b.transpose() * b * a;
    worst_linear = std::max(
        worst_linear, RelativeError(expected, geometry::EnhancedMetric(vae, clf, z).matrix));
  }
  return Verdict(identity_exact && worst_linear <= 1e-10,
                 std::string("identity representation reproduces the pullback ") +
                     (identity_exact ? "bitwise" : "NOT bitwise") +
                     " (100 points); linear closed form max rel err " + Fmt(worst_linear, 3));
}

// ---------------------------------------------------------------------------
// 4. RSGD with the metric forced to identity is SGD.

bool SameSteps(const counterfactual::CeTrajectory& a, const counterfactual::CeTrajectory& b) {
  if (a.steps.size() != b.steps.size() || a.valid != b.valid) return false;
  for (std::size_t t = 0; t < a.steps.size(); ++t) {
    const auto& s = a.steps[t];
    const auto& u = b.steps[t];
    if (s.z != u.z || s.x_hat != u.x_hat || s.confidence != u.confidence || s.loss != u.loss ||
        s.gradient_norm != u.gradient_norm)
      return false;
  }
  return true;
}

Outcome IdentityReduction(const RunConfig& surface, std::uint64_t seed) {
  const fs::path dir = pipeline::SeedDir(surface, seed);
  const auto clf = models::LoadClassifier(dir / "classifier.ckpt");
  const auto vae = models::LoadVae(dir / "vae.ckpt");
  const auto test = data::LoadDataset(dir / "test.ds");
  RunConfig capped = surface;
  capped.max_factuals = 50;
  const auto rows = pipeline::SelectFactuals(capped, clf, test);
  Eigen::MatrixXd factuals(static_cast<Eigen::Index>(rows.size()), test.dim());
  for (std::size_t i = 0; i < rows.size(); ++i)
    factuals.row(static_cast<Eigen::Index>(i)) = test.features.row(rows[i]);

  counterfactual::CeConfig settings;
  settings.iterations = 100;
  const auto sgd = counterfactual::GenerateBatch(vae, clf, factuals, settings, 1);
  std::size_t identical = 0;
  for (auto optimizer : {counterfactual::Optimizer::kRsgd, counterfactual::Optimizer::kRsgdC}) {
    settings.optimizer = optimizer;
    settings.force_identity_metric = true;
    const auto forced = counterfactual::GenerateBatch(vae, clf, factuals, settings, 1);
    for (std::size_t i = 0; i < sgd.size(); ++i) identical += SameSteps(sgd[i], forced[i]) ? 1 : 0;
  }
  return Verdict(rows.size() == 50 && identical == 2 * rows.size(),
                 std::to_string(identical) + "/" + std::to_string(2 * rows.size()) +
                     " RSGD/RSGD-C trajectories with M = I bit-identical to SGD (" +
                     std::to_string(rows.size()) + " surface factuals, 100 steps)");
}

// ---------------------------------------------------------------------------
// 5. Topology experiment on the synthetic surface.

Outcome Topology(const RunConfig& surface, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  const pipeline::SynthDemoResult r = pipeline::SynthDemo(surface, seed);
  const double elapsed = Seconds(start);
  const double ratio = r.hole_volume / r.data_volume;
  const double sgd = r.in_cloud_fraction.at("sgd");
  const double rsgd = r.in_cloud_fraction.at("rsgd");
  const double rsgd_c = r.in_cloud_fraction.at("rsgd_c");
  const bool pass = ratio >= 10 && rsgd >= 0.9 && rsgd_c >= 0.9 && sgd < std::min(rsgd, rsgd_c) &&
                    elapsed < 600;
  return Verdict(pass, "hole/data mean sqrt det " + Fmt(ratio) + " (need >= 10); in-cloud fraction rsgd " +
                           Fmt(rsgd, 3) + ", rsgd_c " + Fmt(rsgd_c, 3) + " (need >= 0.9), sgd " +
                           Fmt(sgd, 3) + " (need lower); " + std::to_string(r.factuals) +
                           " factuals, " + Fmt(elapsed, 3) + " s");
}

// ---------------------------------------------------------------------------
// 10. Determinism across parallelism.

std::map<std::string, std::string> Fingerprints(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    const std::string ext = entry.path().extension().string();
    if (ext == ".traj" || entry.path().filename().string().starts_with("report.") ||
        entry.path().parent_path().filename() == "curves")
      out[fs::relative(entry.path(), root).string()] = FileFingerprint(entry.path());
  }
  return out;
}

Outcome Determinism(const RunConfig& base, const fs::path& work) {
  std::map<std::string, std::string> prints[2];
  const int parallelism[2] = {1, 8};
  for (int k = 0; k < 2; ++k) {
    RunConfig config = base;
    config.out = (work / ("determinism_p" + std::to_string(parallelism[k]))).string();
    config.parallelism = parallelism[k];
    fs::remove_all(config.out);
    for (std::uint64_t seed : config.seeds) {
      pipeline::TrainClassifierStage(config, seed);
      pipeline::TrainVaeStage(config, seed);
      pipeline::GenerateStage(config, seed);
    }
    pipeline::EvaluateStage(config);
    prints[k] = Fingerprints(config.out);
  }
  std::size_t differing = 0;
  for (const auto& [name, print] : prints[0]) {
    const auto it = prints[1].find(name);
    if (it == prints[1].end() || it->second != print) ++differing;
  }
  const bool pass = !prints[0].empty() && prints[0].size() == prints[1].size() && differing == 0;
  return Verdict(pass, std::to_string(prints[0].size()) +
                           " trajectory/report/curve files compared (surface, 2 seeds, full "
                           "pipeline), " + std::to_string(differing) + " differ between parallelism 1 and 8");
}

// ---------------------------------------------------------------------------
// 6, 8, 9. Adult.

const eval::ReportRow& FindRow(const std::vector<eval::ReportRow>& rows, const std::string& optimizer,
                               const std::string& seed) {
  for (const auto& r : rows)
    if (r.optimizer == optimizer && r.seed == seed && !r.constraints && r.n_iter == 100) return r;
  throw StateError("report row missing for " + optimizer + " seed " + seed);
}

Outcome AdultTable(const std::vector<eval::ReportRow>& rows, const std::string& pooled) {
  const auto& sgd = FindRow(rows, "sgd", pooled);
  const auto& rsgd = FindRow(rows, "rsgd", pooled);
  const double ratio = rsgd.realism.mean / sgd.realism.mean;
  const bool closeness = rsgd.l1.mean < sgd.l1.mean && rsgd.l2.mean < sgd.l2.mean;
  const bool fr = sgd.flip_ratio >= rsgd.flip_ratio;
  const bool violation = rsgd.violation <= sgd.violation;
  return Verdict(ratio <= 0.5 && closeness && fr && violation,
                 "L_D sgd " + Fmt(sgd.realism.mean) + " rsgd " + Fmt(rsgd.realism.mean) +
                     " (ratio " + Fmt(ratio, 3) + ", need <= 0.5); L1 " + Fmt(sgd.l1.mean) + " vs " +
                     Fmt(rsgd.l1.mean) + ", L2 " + Fmt(sgd.l2.mean) + " vs " + Fmt(rsgd.l2.mean) +
                     "; FR " + Fmt(sgd.flip_ratio, 3) + " vs " + Fmt(rsgd.flip_ratio, 3) +
                     "; violation " + Fmt(sgd.violation, 3) + " vs " + Fmt(rsgd.violation, 3) +
                     " (sgd vs rsgd, pooled over seeds, 100 iterations, alpha 0)");
}

Outcome CurveProperties(const RunConfig& adult) {
  bool ctr_monotone = true, iters_monotone = true;
  std::map<double, std::vector<double>> sgd_ld, rsgd_ld;
  for (std::uint64_t seed : adult.seeds) {
    const fs::path dir = pipeline::SeedDir(adult, seed);
    const auto train = data::LoadDataset(dir / "train.ds");
    const eval::NearestNeighbor neighbors(train.features);
    for (const std::string optimizer : {"sgd", "rsgd"}) {
      const auto file = counterfactual::LoadTrajectories(
          dir / "ce" / (pipeline::CellName(optimizer, 100, 0.0) + ".traj"));
      const auto curve =
          eval::CtrCurve(file.trajectories, adult.thresholds, neighbors, adult.parallelism);
      for (std::size_t k = 1; k < curve.size(); ++k) {
        ctr_monotone &= curve[k].ctr <= curve[k - 1].ctr;
        if (curve[k].ctr > 0) iters_monotone &= curve[k].iterations >= curve[k - 1].iterations;
      }
      for (const auto& p : curve)
        if (p.threshold >= 0.6 - 1e-12) (optimizer == std::string("sgd") ? sgd_ld : rsgd_ld)[p.threshold].push_back(p.realism);
    }
  }
  bool below = true;
  std::string pairs;
  for (const auto& [tau, values] : sgd_ld) {
    const double s = eval::Summarize(values).mean;
    const double r = eval::Summarize(rsgd_ld[tau]).mean;
    below &= r < s;
    pairs += (pairs.empty() ? "" : ", ") + Fmt(tau, 2) + ": " + Fmt(s, 3) + "/" + Fmt(r, 3);
  }
  return Verdict(ctr_monotone && iters_monotone && below,
                 std::string("CTR non-increasing: ") + (ctr_monotone ? "yes" : "no") +
                     "; mean #iter non-decreasing: " + (iters_monotone ? "yes" : "no") +
                     "; L_D sgd/rsgd at tau " + pairs);
}

Outcome GmcTable(const std::vector<eval::ReportRow>& rows) {
  auto row = [&](const std::string& optimizer) -> const eval::ReportRow& {
    for (const auto& r : rows)
      if (r.optimizer == optimizer && !r.constraints && r.n_iter == 50) return r;
    throw StateError("GMC report row missing for " + optimizer);
  };
  const auto& sgd = row("sgd");
  const auto& rsgd = row("rsgd");
  const auto& rsgd_c = row("rsgd_c");
  const bool closest = rsgd_c.l1.mean < std::min(sgd.l1.mean, rsgd.l1.mean) &&
                       rsgd_c.l2.mean < std::min(sgd.l2.mean, rsgd.l2.mean);
  const bool confident = sgd.confidence.mean > std::max(rsgd.confidence.mean, rsgd_c.confidence.mean);
  return Verdict(closest && confident,
                 "L1 sgd/rsgd/rsgd_c " + Fmt(sgd.l1.mean, 3) + "/" + Fmt(rsgd.l1.mean, 3) + "/" +
                     Fmt(rsgd_c.l1.mean, 3) + ", L2 " + Fmt(sgd.l2.mean, 3) + "/" +
                     Fmt(rsgd.l2.mean, 3) + "/" + Fmt(rsgd_c.l2.mean, 3) + ", confidence " +
                     Fmt(sgd.confidence.mean, 3) + "/" + Fmt(rsgd.confidence.mean, 3) + "/" +
                     Fmt(rsgd_c.confidence.mean, 3) + " (50 iterations, alpha 0)");
}

double MeanTestAccuracy(const RunConfig& config, std::string* values) {
  std::vector<double> accuracies;
  for (std::uint64_t seed : config.seeds) {
    std::ifstream in(pipeline::SeedDir(config, seed) / "classifier_metrics.json");
    const double acc = nlohmann::json::parse(in).at("test_balanced_accuracy").get<double>() * 100;
    accuracies.push_back(acc);
    *values += (values->empty() ? "" : ", ") + Fmt(acc, 4);
  }
  return eval::Summarize(accuracies).mean;
}

Outcome ClassifierAccuracy(const RunConfig& adult, const RunConfig* gmc) {
  std::string adult_values;
  const double adult_mean = MeanTestAccuracy(adult, &adult_values);
  bool pass = std::abs(adult_mean - 77.5) <= 1.5;
  std::string detail = "Adult balanced test accuracy " + Fmt(adult_mean, 4) + "% (seeds: " +
                       adult_values + "; need 77.5 +/- 1.5)";
  if (gmc) {
    std::string gmc_values;
    const double gmc_mean = MeanTestAccuracy(*gmc, &gmc_values);
    pass &= std::abs(gmc_mean - 73.6) <= 1.5;
    detail += "; GMC " + Fmt(gmc_mean, 4) + "% (need 73.6 +/- 1.5)";
  } else {
    detail += "; GMC not checked: data/gmc/cs-training.csv is absent";
  }
  return Verdict(pass, detail);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"riemce acceptance suite"};
  std::string work = "acceptance_runs";
  std::string data_dir = RIEMCE_DATA_DIR;
  int adult_factuals = 0;
  int parallelism = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  std::vector<int> only;
  app.add_option("--work", work, "cache directory for models and runs");
  app.add_option("--data", data_dir, "directory holding adult/ and gmc/");
  app.add_option("--adult-factuals", adult_factuals, "factuals per Adult seed (0 = all)");
  app.add_option("--parallelism", parallelism, "worker threads for CE generation");
  app.add_option("--only", only, "run only these criteria")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  std::map<int, Outcome> results;
  auto wanted = [&](int c) { return only.empty() || std::find(only.begin(), only.end(), c) != only.end(); };
  auto run = [&](int c, const std::function<Outcome()>& body) {
    if (!wanted(c)) return;
    Outcome o;
    try {
      o = body();
    } catch (const std::exception& e) {
      o = {Status::kFail, std::string("error: ") + e.what()};
    }
    results[c] = o;
    std::cout << Line(c, o) << std::endl;
  };

  RunConfig surface = DefaultConfig("surface");
  surface.out = (fs::path(work) / "topology").string();
  surface.parallelism = parallelism;

  RunConfig adult = DefaultConfig("adult");
  adult.out = work;
  adult.raw_paths = {(fs::path(data_dir) / "adult" / "adult.data").string(),
                     (fs::path(data_dir) / "adult" / "adult.test").string()};
  adult.seeds = {0, 1, 2};
  adult.iterations = {100};
  adult.alphas = {0.0};
  adult.max_factuals = adult_factuals;
  adult.parallelism = parallelism;

  run(2, MonteCarloPullback);
  run(3, EnhancedReductions);
  run(5, [&] { return Topology(surface, 0); });
  run(4, [&] {
    if (!fs::exists(pipeline::SeedDir(surface, 0) / "vae.ckpt")) pipeline::SynthDemo(surface, 0);
    return IdentityReduction(surface, 0);
  });
  run(10, [&] {
    RunConfig small = DefaultConfig("surface");
    small.seeds = {0, 1};
    small.iterations = {20, 40};
    small.alphas = {0.0, 0.1};
    small.max_factuals = 40;
    return Determinism(small, work);
  });

  const bool adult_needed = wanted(1) || wanted(6) || wanted(8) || wanted(9);
  bool adult_ready = false;
  std::vector<eval::ReportRow> adult_rows;
  if (adult_needed) {
    try {
      const auto start = std::chrono::steady_clock::now();
      for (std::uint64_t seed : adult.seeds) {
        EnsureModels(adult, seed);
        pipeline::GenerateStage(adult, seed);
      }
      adult_rows = pipeline::EvaluateStage(adult).rows;
      adult_ready = true;
      std::cerr << "[acceptance] Adult pipeline ready after " << Seconds(start) << " s\n";
    } catch (const std::exception& e) {
      for (int c : {1, 6, 8, 9})
        if (wanted(c)) {
          results[c] = {Status::kFail, std::string("Adult pipeline error: ") + e.what()};
          std::cout << Line(c, results[c]) << std::endl;
        }
    }
  }
  if (adult_ready) {
    run(1, [&] { return JacobianSuite(adult, 0); });
    run(6, [&] { return AdultTable(adult_rows, "pooled"); });
    run(8, [&] { return CurveProperties(adult); });
  }

  const fs::path gmc_path = fs::path(data_dir) / "gmc" / "cs-training.csv";
  const bool gmc_available = fs::exists(gmc_path);
  RunConfig gmc = DefaultConfig("gmc");
  gmc.out = work;
  gmc.raw_paths = {gmc_path.string()};
  gmc.iterations = {50};
  gmc.alphas = {0.0};
  gmc.max_factuals = adult_factuals;
  gmc.parallelism = parallelism;
  bool gmc_ready = false;
  run(7, [&]() -> Outcome {
    if (!gmc_available) return {Status::kSkip, "GMC data not found at " + gmc_path.string()};
    for (std::uint64_t seed : gmc.seeds) {
      EnsureModels(gmc, seed);
      pipeline::GenerateStage(gmc, seed);
    }
    const auto rows = pipeline::EvaluateStage(gmc).rows;
    gmc_ready = true;
    return GmcTable(rows);
  });
  if (adult_ready) run(9, [&] { return ClassifierAccuracy(adult, gmc_ready ? &gmc : nullptr); });

  std::cout << "\nsummary\n";
  int failures = 0;
  for (const auto& [c, o] : results) {
    std::cout << Line(c, o) << "\n";
    failures += o.status == Status::kFail ? 1 : 0;
  }
  return failures == 0 ? 0 : 1;
}
