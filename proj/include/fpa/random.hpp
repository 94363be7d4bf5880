/*
 * Copyright 2026 The FPA Authors.
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

#ifndef FPA_RANDOM_HPP_
#define FPA_RANDOM_HPP_

#include <cstdint>
#include <cmath>
#include <random>

namespace fpa {

using Rng = std::mt19937_64;

// SplitMix64 finalizer. Used to derive independent child seeds (per epoch,
// per sample, per bootstrap resample) from a master seed so that results do
// not depend on evaluation order.
inline std::uint64_t MixSeed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t DeriveSeed(std::uint64_t master, std::uint64_t stream,
                                std::uint64_t index = 0) {
  return MixSeed(MixSeed(master ^ MixSeed(stream)) + index);
}

// Uniform double in [0, 1). Avoids std::uniform_real_distribution so that the
// draws are identical across standard library implementations.
inline double Uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double UniformRange(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * Uniform01(rng);
}

// Uniform integer in [lo, hi].
inline std::int64_t UniformInt(Rng& rng, std::int64_t lo, std::int64_t hi) {
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<std::int64_t>(
                  static_cast<std::uint64_t>(Uniform01(rng) * span) % span);
}

inline bool Bernoulli(Rng& rng, double p) { return Uniform01(rng) < p; }

// Standard normal via Box-Muller; one value per call (the second is dropped).
inline double StandardNormal(Rng& rng) {
  double u1 = Uniform01(rng);
  while (u1 <= 0.0) u1 = Uniform01(rng);
  const double u2 = Uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

}  // namespace fpa

#endif  // FPA_RANDOM_HPP_
