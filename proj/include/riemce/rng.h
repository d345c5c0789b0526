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

#ifndef RIEMCE_RNG_H_
#define RIEMCE_RNG_H_

#include <cstdint>
#include <random>
#include <string_view>

namespace riemce {

// Deterministic random stream. The engine is std::mt19937_64, whose output
// sequence is fixed by the standard. The standard distributions are not
// (their algorithms are implementation-defined), so uniform and normal
// variates are derived here from raw engine output to keep streams
// bit-identical across standard libraries.
class Rng {
 public:
  static constexpr std::string_view kAlgorithm = "mt19937_64";

  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t NextU64() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of precision.
  double Uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

  // Uniform integer in [0, n). Uses rejection to avoid modulo bias.
  std::uint64_t UniformIndex(std::uint64_t n);

  // Standard normal via Box-Muller; caches the second variate.
  double Normal();

  double Normal(double mean, double stddev) { return mean + stddev * Normal(); }

  // Child stream keyed by a label. The same (seed, label) pair always yields
  // the same child, and distinct labels give unrelated streams.
  Rng Derive(std::string_view label) const;

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Labeled subseed derivation: splitmix64 over (root, FNV-1a(label)).
std::uint64_t DeriveSeed(std::uint64_t root, std::string_view label);

}  // namespace riemce

#endif  // RIEMCE_RNG_H_
