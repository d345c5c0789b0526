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

#include "riemce/checkpoint.h"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "riemce/errors.h"

namespace riemce {
namespace {

constexpr char kMagic[8] = {'R', 'I', 'E', 'M', 'C', 'E', '\0', '\1'};

template <typename T>
void AppendLe(std::string& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big)
    std::reverse(std::begin(bytes), std::end(bytes));
  out.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T ReadLe(std::string_view bytes, std::size_t& pos) {
  if (pos + sizeof(T) > bytes.size())
    throw SchemaError("checkpoint truncated");
  unsigned char raw[sizeof(T)];
  std::memcpy(raw, bytes.data() + pos, sizeof(T));
  if constexpr (std::endian::native == std::endian::big)
    std::reverse(std::begin(raw), std::end(raw));
  pos += sizeof(T);
  T value;
  std::memcpy(&value, raw, sizeof(T));
  return value;
}

}  // namespace

void Archive::PutMatrix(const std::string& name, const Eigen::MatrixXd& value) {
  tensors_[name] = value;
}

const Eigen::MatrixXd& Archive::GetMatrix(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end())
    throw SchemaError("checkpoint has no tensor '" + name + "'");
  return it->second;
}

Eigen::VectorXd Archive::GetVector(const std::string& name) const {
  const Eigen::MatrixXd& m = GetMatrix(name);
  if (m.cols() != 1)
    throw SchemaError("tensor '" + name + "' is not a column vector");
  return m.col(0);
}

bool Archive::HasMatrix(const std::string& name) const {
  return tensors_.count(name) > 0;
}

void Archive::PutScalar(const std::string& name, double value) {
  tensors_[name] = Eigen::MatrixXd::Constant(1, 1, value);
}

double Archive::GetScalar(const std::string& name) const {
  const Eigen::MatrixXd& m = GetMatrix(name);
  if (m.size() != 1) throw SchemaError("tensor '" + name + "' is not a scalar");
  return m(0, 0);
}

void Archive::PutNet(const std::string& prefix, const nn::DenseNet& net) {
  nlohmann::json spec;
  spec["input_dim"] = net.input_dim();
  spec["layers"] = nlohmann::json::array();
  for (std::size_t k = 0; k < net.layers().size(); ++k) {
    const nn::DenseLayer& layer = net.layers()[k];
    const std::string base = prefix + "/" + std::to_string(k) + "/";
    nlohmann::json l;
    l["in"] = layer.in_dim();
    l["out"] = layer.out_dim();
    l["activation"] = std::string(nn::ActivationName(layer.activation));
    l["batchnorm"] = layer.batchnorm.has_value();
    PutMatrix(base + "weight", layer.weight);
    PutMatrix(base + "bias", layer.bias);
    if (layer.batchnorm) {
      const nn::BatchNorm& bn = *layer.batchnorm;
      PutScalar(base + "bn_epsilon", bn.epsilon);
      PutScalar(base + "bn_momentum", bn.momentum);
      PutMatrix(base + "bn_running_mean", bn.running_mean);
      PutMatrix(base + "bn_running_var", bn.running_var);
      PutMatrix(base + "bn_scale", bn.scale);
      PutMatrix(base + "bn_shift", bn.shift);
    }
    spec["layers"].push_back(std::move(l));
  }
  meta_["nets"][prefix] = std::move(spec);
}

nn::DenseNet Archive::GetNet(const std::string& prefix) const {
  if (!meta_.contains("nets") || !meta_["nets"].contains(prefix))
    throw SchemaError("checkpoint has no network '" + prefix + "'");
  const nlohmann::json& spec = meta_["nets"][prefix];
  std::vector<nn::DenseLayer> layers;
  std::size_t k = 0;
  for (const auto& l : spec.at("layers")) {
    const std::string base = prefix + "/" + std::to_string(k++) + "/";
    nn::DenseLayer layer;
    layer.weight = GetMatrix(base + "weight");
    layer.bias = GetVector(base + "bias");
    layer.activation = nn::ParseActivation(l.at("activation").get<std::string>());
    if (layer.weight.rows() != l.at("out").get<Eigen::Index>() ||
        layer.weight.cols() != l.at("in").get<Eigen::Index>())
      throw SchemaError("layer spec disagrees with weight shape in '" + prefix + "'");
    if (l.at("batchnorm").get<bool>()) {
      nn::BatchNorm bn;
      bn.epsilon = GetScalar(base + "bn_epsilon");
      bn.momentum = GetScalar(base + "bn_momentum");
      bn.running_mean = GetVector(base + "bn_running_mean");
      bn.running_var = GetVector(base + "bn_running_var");
      bn.scale = GetVector(base + "bn_scale");
      bn.shift = GetVector(base + "bn_shift");
      layer.batchnorm = std::move(bn);
    }
    layers.push_back(std::move(layer));
  }
  return nn::DenseNet(std::move(layers));
}

std::string Archive::Serialize() const {
  nlohmann::json header = meta_;
  header["format_version"] = kCheckpointFormatVersion;
  header["tensors"] = nlohmann::json::array();
  for (const auto& [name, m] : tensors_)
    header["tensors"].push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
  const std::string text = header.dump();

  std::string out(kMagic, sizeof(kMagic));
  AppendLe<std::uint32_t>(out, kCheckpointFormatVersion);
  AppendLe<std::uint64_t>(out, text.size());
  out += text;
  for (const auto& [name, m] : tensors_)
    for (Eigen::Index i = 0; i < m.size(); ++i) AppendLe<double>(out, m.data()[i]);
  return out;
}

Archive Archive::Deserialize(std::string_view bytes) {
  if (bytes.size() < sizeof(kMagic) ||
      std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw SchemaError("not a riemce checkpoint (bad magic)");
  std::size_t pos = sizeof(kMagic);
  const auto version = ReadLe<std::uint32_t>(bytes, pos);
  if (version != kCheckpointFormatVersion)
    throw SchemaError("unsupported checkpoint format version " +
                      std::to_string(version));
  const auto length = ReadLe<std::uint64_t>(bytes, pos);
  if (pos + length > bytes.size()) throw SchemaError("checkpoint truncated");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(pos, length));
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("checkpoint header: ") + e.what());
  }
  pos += length;

  Archive archive;
  for (const auto& t : header.at("tensors")) {
    const auto rows = t.at("rows").get<Eigen::Index>();
    const auto cols = t.at("cols").get<Eigen::Index>();
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = ReadLe<double>(bytes, pos);
    archive.tensors_[t.at("name").get<std::string>()] = std::move(m);
  }
  if (pos != bytes.size()) throw SchemaError("trailing bytes after checkpoint");
  header.erase("tensors");
  header.erase("format_version");
  archive.meta_ = std::move(header);
  return archive;
}

void Archive::Save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  const std::string bytes = Serialize();
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

Archive Archive::Load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return Deserialize(buffer.str());
}

std::string FileFingerprint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char c;
  while (in.get(c)) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

}  // namespace riemce
