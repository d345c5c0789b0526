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

#include "riemce/config.h"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "riemce/errors.h"
#include "riemce/rng.h"

namespace riemce {
namespace {

std::string Trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> SplitList(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream in(value);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = Trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T ParseNumber(const std::string& key, const std::string& text) {
  T value{};
  const std::string s = Trim(text);
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || end != s.data() + s.size() || s.empty())
    throw ConfigError("option '" + key + "': cannot parse '" + text + "'");
  return value;
}

bool ParseBool(const std::string& key, const std::string& text) {
  const std::string s = Trim(text);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError("option '" + key + "': expected true/false, got '" + text + "'");
}

template <typename T>
std::vector<T> ParseList(const std::string& key, const std::string& text) {
  std::vector<T> out;
  for (const std::string& item : SplitList(text)) out.push_back(ParseNumber<T>(key, item));
  return out;
}

std::string Format(double v) {
  char buffer[64];
  const auto [end, ec] = std::to_chars(buffer, buffer + sizeof buffer, v);
  return std::string(buffer, end);
}
template <typename T>
std::string Format(T v) requires std::is_integral_v<T> {
  return std::to_string(v);
}
std::string Format(bool v) { return v ? "true" : "false"; }
std::string Format(const std::string& v) { return v; }

template <typename T>
std::string FormatList(const std::vector<T>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) out += (i ? ", " : "") + Format(values[i]);
  return out;
}

struct Option {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

// Binds a key to a scalar member reachable through `field`.
template <typename T, typename Field>
Option Scalar(std::string key, Field field) {
  return {key,
          [field, key](RunConfig& c, const std::string& v) {
            T& target = field(c);
            if constexpr (std::is_same_v<T, bool>) {
              target = ParseBool(key, v);
            } else if constexpr (std::is_same_v<T, std::string>) {
              target = Trim(v);
            } else {
              target = ParseNumber<T>(key, v);
            }
          },
          [field](const RunConfig& c) { return Format(field(const_cast<RunConfig&>(c))); }};
}

template <typename T, typename Field>
Option List(std::string key, Field field) {
  return {key,
          [field, key](RunConfig& c, const std::string& v) {
            if constexpr (std::is_same_v<T, std::string>) {
              field(c) = SplitList(v);
            } else {
              field(c) = ParseList<T>(key, v);
            }
          },
          [field](const RunConfig& c) { return FormatList(field(const_cast<RunConfig&>(c))); }};
}

nn::OptimizerKind ParseOptimizerKind(const std::string& v) {
  if (v == "adam") return nn::OptimizerKind::kAdam;
  if (v == "rmsprop") return nn::OptimizerKind::kRmsprop;
  throw ConfigError("classifier.optimizer must be adam or rmsprop, got '" + v + "'");
}

const std::vector<Option>& Options() {
  static const std::vector<Option> options = [] {
    std::vector<Option> o;
    o.push_back(Scalar<std::string>("dataset", [](RunConfig& c) -> auto& { return c.dataset; }));
    o.push_back(List<std::string>("raw_path", [](RunConfig& c) -> auto& { return c.raw_paths; }));
    o.push_back(Scalar<std::string>("out", [](RunConfig& c) -> auto& { return c.out; }));
    o.push_back(List<std::uint64_t>("seeds", [](RunConfig& c) -> auto& { return c.seeds; }));
    o.push_back(Scalar<int>("parallelism", [](RunConfig& c) -> auto& { return c.parallelism; }));

    o.push_back(Scalar<int>("classifier.hidden",
                            [](RunConfig& c) -> auto& { return c.classifier.representation_dim; }));
    o.push_back(Scalar<bool>("classifier.batchnorm",
                             [](RunConfig& c) -> auto& { return c.classifier.batchnorm; }));
    o.push_back(Scalar<double>("classifier.lr",
                               [](RunConfig& c) -> auto& { return c.classifier.learning_rate; }));
    o.push_back(Scalar<double>("classifier.l2", [](RunConfig& c) -> auto& { return c.classifier.l2; }));
    o.push_back(Scalar<int>("classifier.epochs",
                            [](RunConfig& c) -> auto& { return c.classifier.epochs; }));
    o.push_back(Scalar<int>("classifier.batch",
                            [](RunConfig& c) -> auto& { return c.classifier.batch_size; }));
    o.push_back({"classifier.optimizer",
                 [](RunConfig& c, const std::string& v) {
                   c.classifier.optimizer = ParseOptimizerKind(Trim(v));
                 },
                 [](const RunConfig& c) {
                   return std::string(c.classifier.optimizer == nn::OptimizerKind::kAdam ? "adam"
                                                                                         : "rmsprop");
                 }});

    o.push_back(Scalar<int>("vae.latent_dim", [](RunConfig& c) -> auto& { return c.vae.latent_dim; }));
    o.push_back(List<int>("vae.hidden", [](RunConfig& c) -> auto& { return c.vae.hidden; }));
    o.push_back(Scalar<bool>("vae.batchnorm", [](RunConfig& c) -> auto& { return c.vae.batchnorm; }));
    o.push_back(Scalar<double>("vae.beta", [](RunConfig& c) -> auto& { return c.vae.beta; }));
    o.push_back(Scalar<int>("vae.epochs", [](RunConfig& c) -> auto& { return c.vae.epochs; }));
    o.push_back(Scalar<double>("vae.lr", [](RunConfig& c) -> auto& { return c.vae.learning_rate; }));
    o.push_back(Scalar<int>("vae.batch", [](RunConfig& c) -> auto& { return c.vae.batch_size; }));
    o.push_back(Scalar<bool>("vae.sample_latent",
                             [](RunConfig& c) -> auto& { return c.vae.sample_latent; }));

    o.push_back(Scalar<int>("rbf.centers", [](RunConfig& c) -> auto& { return c.rbf.centers; }));
    o.push_back(Scalar<double>("rbf.bandwidth", [](RunConfig& c) -> auto& { return c.rbf.bandwidth; }));
    o.push_back(Scalar<double>("rbf.floor", [](RunConfig& c) -> auto& { return c.rbf.floor; }));
    o.push_back(Scalar<int>("rbf.epochs", [](RunConfig& c) -> auto& { return c.rbf.epochs; }));
    o.push_back(Scalar<double>("rbf.lr", [](RunConfig& c) -> auto& { return c.rbf.learning_rate; }));
    o.push_back(Scalar<int>("rbf.batch", [](RunConfig& c) -> auto& { return c.rbf.batch_size; }));
    o.push_back(Scalar<int>("rbf.kmeans_iterations",
                            [](RunConfig& c) -> auto& { return c.rbf.kmeans_iterations; }));

    o.push_back(Scalar<std::size_t>("surface.samples",
                                    [](RunConfig& c) -> auto& { return c.surface.samples; }));
    o.push_back(Scalar<double>("surface.noise", [](RunConfig& c) -> auto& { return c.surface.noise; }));
    o.push_back(Scalar<double>("surface.hole_radius",
                               [](RunConfig& c) -> auto& { return c.surface.hole_radius; }));
    o.push_back({"surface.hole_center",
                 [](RunConfig& c, const std::string& v) {
                   const auto xy = ParseList<double>("surface.hole_center", v);
                   if (xy.size() != 2) throw ConfigError("surface.hole_center needs two values");
                   c.surface.hole_center = Eigen::Vector2d(xy[0], xy[1]);
                 },
                 [](const RunConfig& c) {
                   return FormatList(std::vector<double>{c.surface.hole_center(0),
                                                         c.surface.hole_center(1)});
                 }});
    o.push_back(Scalar<double>("surface.domain_low",
                               [](RunConfig& c) -> auto& { return c.surface.domain_low; }));
    o.push_back(Scalar<double>("surface.domain_high",
                               [](RunConfig& c) -> auto& { return c.surface.domain_high; }));
    o.push_back(Scalar<double>("surface.coefficient",
                               [](RunConfig& c) -> auto& { return c.surface.boundary_coefficient; }));
    o.push_back(Scalar<bool>("gmc.invert_label",
                             [](RunConfig& c) -> auto& { return c.gmc_invert_label; }));

    o.push_back(List<std::string>("ce.optimizers", [](RunConfig& c) -> auto& { return c.optimizers; }));
    o.push_back(List<int>("ce.iterations", [](RunConfig& c) -> auto& { return c.iterations; }));
    o.push_back(List<double>("ce.alphas", [](RunConfig& c) -> auto& { return c.alphas; }));
    o.push_back(Scalar<double>("ce.step_size", [](RunConfig& c) -> auto& { return c.step_size; }));
    o.push_back(Scalar<bool>("ce.normalize", [](RunConfig& c) -> auto& { return c.normalize; }));
    o.push_back(List<double>("ce.thresholds", [](RunConfig& c) -> auto& { return c.thresholds; }));
    o.push_back(Scalar<int>("ce.max_factuals", [](RunConfig& c) -> auto& { return c.max_factuals; }));
    o.push_back(Scalar<bool>("ce.write_jsonl", [](RunConfig& c) -> auto& { return c.write_jsonl; }));
    o.push_back(Scalar<double>("eval.change_tolerance",
                               [](RunConfig& c) -> auto& { return c.change_tolerance; }));
    o.push_back(Scalar<int>("map.grid_size", [](RunConfig& c) -> auto& { return c.grid_size; }));
    o.push_back(Scalar<std::string>("map.metric", [](RunConfig& c) -> auto& { return c.metric; }));
    return o;
  }();
  return options;
}

}  // namespace

void RunConfig::Validate() const {
  if (dataset != "adult" && dataset != "gmc" && dataset != "surface")
    throw ConfigError("dataset must be adult, gmc or surface, got '" + dataset + "'");
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (parallelism < 1) throw ConfigError("parallelism must be at least 1");
  if (optimizers.empty() || iterations.empty() || alphas.empty())
    throw ConfigError("the CE grid needs optimizers, iterations and alphas");
  for (int it : iterations)
    if (it < 1) throw ConfigError("ce.iterations entries must be at least 1");
  for (double a : alphas)
    if (!(a >= 0)) throw ConfigError("ce.alphas entries must be non-negative");
  if (!(step_size > 0)) throw ConfigError("ce.step_size must be positive");
  if (thresholds.empty()) throw ConfigError("ce.thresholds must not be empty");
  if (max_factuals < 0) throw ConfigError("ce.max_factuals must be non-negative");
  if (grid_size < 2) throw ConfigError("map.grid_size must be at least 2");
  if (metric != "pullback" && metric != "enhanced")
    throw ConfigError("map.metric must be pullback or enhanced");
  if (vae.latent_dim < 1) throw ConfigError("vae.latent_dim must be positive");
  if (!(rbf.bandwidth > 0) || !(rbf.floor > 0)) throw ConfigError("rbf bandwidth/floor must be positive");
}

RunConfig DefaultConfig(const std::string& dataset) {
  RunConfig c;
  c.dataset = dataset;
  // Kernel width in latent units; see README for why this is not 0.01.
  c.rbf.bandwidth = 0.3;
  if (dataset == "adult") {
    c.raw_paths = {"data/adult/adult.data", "data/adult/adult.test"};
  } else if (dataset == "gmc") {
    c.raw_paths = {"data/gmc/cs-training.csv"};
    c.rbf.centers = 350;
    c.rbf.learning_rate = 1e-2;
  } else if (dataset == "surface") {
    c.raw_paths = {};
    c.classifier.representation_dim = 8;
    c.classifier.optimizer = nn::OptimizerKind::kAdam;
    c.classifier.learning_rate = 1e-2;
    c.classifier.l2 = 0.0;
    c.classifier.epochs = 60;
    c.classifier.batch_size = 128;
    c.vae.latent_dim = 2;
    c.vae.hidden = {64, 32};
    c.vae.epochs = 300;
    c.vae.batch_size = 128;
    c.rbf.centers = 64;
    c.rbf.bandwidth = 0.05;
    c.rbf.learning_rate = 1e-2;
    c.rbf.batch_size = 128;
    c.iterations = {100};
    c.alphas = {0.0};
  } else {
    throw ConfigError("unknown dataset '" + dataset + "'");
  }
  return c;
}

void ApplyOption(RunConfig& config, const std::string& key, const std::string& value) {
  for (const Option& option : Options())
    if (option.key == key) {
      option.set(config, value);
      return;
    }
  throw ConfigError("unknown configuration key '" + key + "'");
}

std::map<std::string, std::string> ReadKeyValueFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file '" + path.string() + "'");
  std::map<std::string, std::string> out;
  std::string line;
  for (int number = 1; std::getline(in, line); ++number) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = Trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path.string() + ":" + std::to_string(number) + ": expected key = value");
    out[Trim(line.substr(0, eq))] = Trim(line.substr(eq + 1));
  }
  return out;
}

RunConfig BuildConfig(const std::map<std::string, std::string>& options) {
  const auto it = options.find("dataset");
  RunConfig config = DefaultConfig(it == options.end() ? "adult" : Trim(it->second));
  for (const auto& [key, value] : options) ApplyOption(config, key, value);
  config.Validate();
  return config;
}

std::string SerializeConfig(const RunConfig& config) {
  std::string out;
  for (const Option& option : Options()) out += option.key + " = " + option.get(config) + "\n";
  return out;
}

std::uint64_t ComponentSeed(std::uint64_t root, const std::string& component) {
  return DeriveSeed(root, component);
}

}  // namespace riemce
