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

// Command-line entry point: riemce <command> [options].
//
// Exit codes: 0 success, 2 configuration/input problems (bad config, missing
// files, malformed artifacts), 3 runtime failures (including runs that
// produced flagged-invalid trajectories). Every nonzero exit leaves a JSON
// error record at <out>/error_<command>.json.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "riemce/config.h"
#include "riemce/errors.h"
#include "riemce/pipeline.h"

namespace {

using riemce::RunConfig;
namespace fs = std::filesystem;
namespace pipeline = riemce::pipeline;

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct CommonFlags {
  std::string config_file;
  std::string dataset;
  std::vector<std::uint64_t> seeds;
  std::string out;
  std::optional<int> parallelism;
  std::vector<std::string> raw_paths;
  std::vector<std::string> overrides;  // key=value
};

// Raised when a command finished but produced flagged artifacts.
class FlaggedArtifacts : public riemce::Error {
 public:
  using riemce::Error::Error;
};

void AddCommonFlags(CLI::App* command, CommonFlags& flags) {
  command->add_option("--config", flags.config_file, "key = value configuration file");
  command->add_option("--dataset", flags.dataset, "adult, gmc or surface");
  command->add_option("--seed", flags.seeds, "root seed(s)")->delimiter(',');
  command->add_option("--out", flags.out, "output directory");
  command->add_option("--parallelism", flags.parallelism, "worker threads");
  command->add_option("--raw-path", flags.raw_paths, "raw data file(s)")->delimiter(',');
  command->add_option("--set", flags.overrides, "override any configuration key (key=value)");
}

std::string Join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
  return out;
}

RunConfig ResolveConfig(const CommonFlags& flags, const std::string& forced_dataset) {
  std::map<std::string, std::string> options;
  if (!flags.config_file.empty()) options = riemce::ReadKeyValueFile(flags.config_file);
  if (!forced_dataset.empty()) {
    if (!flags.dataset.empty() && flags.dataset != forced_dataset)
      throw riemce::ConfigError("this command only supports --dataset " + forced_dataset);
    if (options.contains("dataset") && options["dataset"] != forced_dataset)
      throw riemce::ConfigError("this command only supports dataset = " + forced_dataset);
    options["dataset"] = forced_dataset;
  }
  if (!flags.dataset.empty()) options["dataset"] = flags.dataset;
  if (!flags.seeds.empty()) {
    std::vector<std::string> seeds;
    for (std::uint64_t s : flags.seeds) seeds.push_back(std::to_string(s));
    options["seeds"] = Join(seeds);
  }
  if (!flags.out.empty()) options["out"] = flags.out;
  if (flags.parallelism) options["parallelism"] = std::to_string(*flags.parallelism);
  if (!flags.raw_paths.empty()) options["raw_path"] = Join(flags.raw_paths);
  for (const std::string& item : flags.overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw riemce::ConfigError("--set expects key=value, got '" + item + "'");
    options[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return riemce::BuildConfig(options);
}

void SaveEffectiveConfig(const RunConfig& config, const std::string& command) {
  const fs::path path = pipeline::DatasetDir(config) / (command + ".cfg");
  fs::create_directories(path.parent_path());
  std::ofstream(path) << "# effective configuration for '" << command << "'\n"
                      << riemce::SerializeConfig(config);
}

void Log(const std::string& message) { std::cerr << "[riemce] " << message << std::endl; }

int Run(const std::string& command, const RunConfig& config) {
  SaveEffectiveConfig(config, command);
  if (command == "train-classifier") {
    for (std::uint64_t seed : config.seeds) {
      const auto model = pipeline::TrainClassifierStage(config, seed);
      Log("seed " + std::to_string(seed) + ": test balanced accuracy " +
          std::to_string(model.test_balanced_accuracy));
    }
  } else if (command == "train-vae") {
    for (std::uint64_t seed : config.seeds) {
      const auto vae = pipeline::TrainVaeStage(config, seed);
      Log("seed " + std::to_string(seed) + ": warm-up reconstruction MSE " +
          std::to_string(vae.warmup_reconstruction_mse));
    }
  } else if (command == "generate-ce") {
    std::size_t invalid = 0;
    for (std::uint64_t seed : config.seeds) {
      const auto summary = pipeline::GenerateStage(config, seed);
      invalid += summary.invalid_trajectories;
      Log("seed " + std::to_string(seed) + ": " + std::to_string(summary.cells_written) +
          " cells written, " + std::to_string(summary.cells_reused) + " reused");
    }
    if (invalid > 0)
      throw FlaggedArtifacts(std::to_string(invalid) + " trajectories were flagged invalid");
  } else if (command == "evaluate") {
    const auto summary = pipeline::EvaluateStage(config);
    Log(std::to_string(summary.rows.size()) + " report rows written to " +
        (pipeline::DatasetDir(config) / "report.csv").string());
    if (summary.invalid_trajectories > 0)
      throw FlaggedArtifacts(std::to_string(summary.invalid_trajectories) +
                             " evaluated trajectories are flagged invalid");
  } else if (command == "metric-map") {
    for (std::uint64_t seed : config.seeds)
      Log("wrote " + pipeline::MetricMapStage(config, seed).string());
  } else if (command == "synth-demo") {
    for (std::uint64_t seed : config.seeds) {
      const auto result = pipeline::SynthDemo(config, seed);
      Log("seed " + std::to_string(seed) + ": hole/data volume ratio " +
          std::to_string(result.hole_volume / result.data_volume));
      for (const auto& [optimizer, fraction] : result.in_cloud_fraction)
        Log("  " + optimizer + " in-cloud fraction " + std::to_string(fraction));
    }
  }
  return 0;
}

void WriteErrorRecord(const std::string& out, const std::string& command,
                      const std::string& category, const std::string& message, int code) {
  try {
    const fs::path path = fs::path(out) / ("error_" + command + ".json");
    fs::create_directories(path.parent_path());
    std::ofstream(path) << nlohmann::json{{"command", command},
                                          {"category", category},
                                          {"message", message},
                                          {"exit_code", code}}
                               .dump(2)
                        << "\n";
  } catch (const std::exception&) {
    // The record is best effort; stderr already has the message.
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Riemannian counterfactual explanations"};
  app.require_subcommand(1);
  CommonFlags flags;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"train-classifier", "train the classifier for each seed"},
      {"train-vae", "train the VAE and fit its decoder variance"},
      {"generate-ce", "generate counterfactual trajectories for the whole grid"},
      {"evaluate", "write report and threshold-curve files"},
      {"synth-demo", "run the synthetic surface experiment end to end"},
      {"metric-map", "write a latent metric-volume grid (2-D latent spaces)"}};
  for (const auto& [name, help] : commands) AddCommonFlags(app.add_subcommand(name, help), flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  std::string out = flags.out.empty() ? "runs" : flags.out;
  std::string category;
  std::string message;
  int code = 0;
  try {
    const RunConfig config =
        ResolveConfig(flags, command == "synth-demo" ? std::string("surface") : std::string());
    out = config.out;
    const auto start = std::chrono::steady_clock::now();
    code = Run(command, config);
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    Log(command + " finished in " + std::to_string(elapsed.count()) + " s");
  } catch (const riemce::ConfigError& e) {
    category = "config", message = e.what(), code = kExitConfig;
  } catch (const riemce::SchemaError& e) {
    category = "schema", message = e.what(), code = kExitConfig;
  } catch (const riemce::IoError& e) {
    category = "io", message = e.what(), code = kExitConfig;
  } catch (const FlaggedArtifacts& e) {
    category = "invalid_artifacts", message = e.what(), code = kExitRuntime;
  } catch (const std::exception& e) {
    category = "runtime", message = e.what(), code = kExitRuntime;
  }
  if (code != 0) {
    std::cerr << "riemce " << command << ": " << message << "\n";
    WriteErrorRecord(out, command, category, message, code);
  }
  return code;
}
