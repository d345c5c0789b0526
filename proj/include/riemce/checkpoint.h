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

#ifndef RIEMCE_CHECKPOINT_H_
#define RIEMCE_CHECKPOINT_H_

// Binary checkpoint container.
//
// Layout (all integers little-endian):
//   8 bytes   magic "RIEMCE\0\1"
//   u32       format version
//   u64       header length in bytes
//   ...       UTF-8 JSON header
//   ...       tensor blobs, in header["tensors"] order, each rows*cols
//             little-endian IEEE-754 doubles in column-major order
//
// The JSON header describes every tensor (name, rows, cols) plus arbitrary
// metadata: model kind, layer specs, activation tags, batchnorm flags.
// Doubles are copied bit-for-bit, so save/load round-trips exactly.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "riemce/nn.h"

namespace riemce {

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

class Archive {
 public:
  nlohmann::json& meta() { return meta_; }
  const nlohmann::json& meta() const { return meta_; }

  void PutMatrix(const std::string& name, const Eigen::MatrixXd& value);
  const Eigen::MatrixXd& GetMatrix(const std::string& name) const;
  Eigen::VectorXd GetVector(const std::string& name) const;
  bool HasMatrix(const std::string& name) const;

  void PutScalar(const std::string& name, double value);
  double GetScalar(const std::string& name) const;

  void PutNet(const std::string& prefix, const nn::DenseNet& net);
  nn::DenseNet GetNet(const std::string& prefix) const;

  std::string Serialize() const;
  static Archive Deserialize(std::string_view bytes);

  void Save(const std::filesystem::path& path) const;
  static Archive Load(const std::filesystem::path& path);

 private:
  nlohmann::json meta_ = nlohmann::json::object();
  std::map<std::string, Eigen::MatrixXd> tensors_;
};

// FNV-1a 64-bit fingerprint of a file's bytes, as hex. Used by tests and
// the CLI to compare artifacts across reruns.
std::string FileFingerprint(const std::filesystem::path& path);

}  // namespace riemce

#endif  // RIEMCE_CHECKPOINT_H_
