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

#ifndef FPA_PERTURB_HPP_
#define FPA_PERTURB_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fpa/model.hpp"
#include "fpa/saliency.hpp"
#include "fpa/tensor.hpp"

namespace fpa {

// Most important first / least important first.
enum class Direction { kMif, kLif };

std::string_view DirectionName(Direction d);

struct PixelRanking {
  std::vector<std::size_t> order;  // row-major pixel indices
  Direction direction = Direction::kMif;
  Signedness signedness = Signedness::kSigned;
};

// MIF order: scores sorted descending (largest positive to most negative),
// ties by ascending pixel index.
PixelRanking RankPixels(const SaliencyMap2D& map);
// MIF <-> LIF.
PixelRanking ReverseRanking(const PixelRanking& ranking);

// 0%, 2%, ..., 100%.
std::vector<double> DefaultFractionGrid(std::size_t points = 51);
// Throws unless strictly increasing, inside [0, 1] and starting at 0.
void ValidateFractionGrid(std::span<const double> fractions);
// Number of masked pixels per grid point: floor(f * num_pixels).
std::vector<std::size_t> MaskedCounts(std::span<const double> fractions,
                                      std::size_t num_pixels);

inline constexpr double kMinBaseLogit = 1e-6;

struct SampleCurve {
  std::vector<double> values;  // S_c(masked) / S_c(x), one per fraction
  double base_logit = 0.0;
  bool excluded = false;  // |S_c(x)| < kMinBaseLogit
};

// Masks the first floor(f * H * W) ranked pixels (all channels) with
// mask_value for each grid fraction f and records the normalized logit of
// the fixed class c.
SampleCurve ComputeSampleCurve(const Model& model, const Tensor& x, int c,
                               const PixelRanking& ranking,
                               std::span<const double> fractions,
                               float mask_value);

struct PerturbationCurve {
  std::vector<double> fractions;
  std::vector<double> mean;  // mean normalized logit per fraction
  std::vector<std::vector<double>> per_sample;  // included samples only
  std::size_t excluded = 0;
  std::string estimator;
  std::string direction;
  std::string model;
  std::string augmentation;
};

PerturbationCurve AggregateCurves(std::span<const double> fractions,
                                  std::span<const SampleCurve> samples);

// Trapezoidal integral with the fraction axis in percentage points [0, 100].
double TrapezoidArea(std::span<const double> fractions,
                     std::span<const double> values);

// A = area between the LIF and MIF curves (LIF minus MIF).
double FidelityArea(const PerturbationCurve& lif, const PerturbationCurve& mif);

struct FidelityResult {
  double area = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t num_samples = 0;
  std::size_t excluded = 0;
  std::size_t bootstrap_resamples = 0;
  std::uint64_t seed = 0;
};

// Nonparametric percentile bootstrap: resamples sample indices with
// replacement, recomputes both mean curves and A, and reports the 2.5 and
// 97.5 percentiles. The interval is widened to contain the point estimate if
// needed.
FidelityResult BootstrapCi(const PerturbationCurve& lif,
                           const PerturbationCurve& mif,
                           std::size_t resamples, std::uint64_t seed);

// Scores in the ranking's order.
std::vector<float> RankedScoreSeries(const SaliencyMap2D& map,
                                     const PixelRanking& ranking);

}  // namespace fpa

#endif  // FPA_PERTURB_HPP_
