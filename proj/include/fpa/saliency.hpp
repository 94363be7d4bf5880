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

#ifndef FPA_SALIENCY_HPP_
#define FPA_SALIENCY_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fpa/model.hpp"
#include "fpa/tensor.hpp"

namespace fpa {

enum class Estimator {
  kVanillaGradient,
  kIntegratedGradients,
  kSmoothGrad,
  kSquaredSmoothGrad,
  kRandom,
};

enum class Reduction {
  kAbsSum,               // sum_c |e|
  kInputProductSum,      // sum_c e * x
  kInputProductAbsSum,   // sum_c |e * x|
  kPlainSum,             // sum_c e
};

enum class Signedness { kSigned, kUnsigned };

std::string_view EstimatorName(Estimator e);
std::string_view ReductionName(Reduction r);
std::string_view SignednessName(Signedness s);

struct SaliencyMap3D {
  Tensor scores;  // H x W x C
  Estimator estimator = Estimator::kVanillaGradient;
  int class_index = 0;
  std::size_t sample_id = 0;
};

struct SaliencyMap2D {
  Tensor scores;  // H x W
  Signedness signedness = Signedness::kSigned;
  Reduction reduction = Reduction::kPlainSum;
  Estimator estimator = Estimator::kVanillaGradient;
};

struct EstimatorConfig {
  std::size_t ig_steps = 200;
  Tensor ig_baseline;  // model-space black image, same shape as the input
  std::size_t sg_samples = 15;
  double sg_sigma = 0.2;  // 0.1 x (max - min) of the [-1, 1] input range

  void Validate() const;
};

// Predicted class of the unperturbed input (ties to the smallest index).
int PredictClass(const Model& model, const Tensor& image);

// Row k of the result is dS_c(batch[k]) / d batch[k] for the pre-softmax
// logit S_c.
Tensor InputGradients(const Model& model, const Tensor& batch, int class_index);

// e = dS_c / dx.
SaliencyMap3D VanillaGradient(const Model& model, const Tensor& x, int c);

// e = (x - x0) * (1/m) sum_{k=1..m} dS_c(x0 + (k/m)(x - x0)) / dx.
SaliencyMap3D IntegratedGradients(const Model& model, const Tensor& x, int c,
                                  const EstimatorConfig& cfg);

// Per-draw vanilla gradients VG(x + xi_i), xi_i ~ N(0, sigma^2) elementwise,
// i = 1..n. SmoothGrad and squared SmoothGrad are both reductions of these
// draws, so for a shared seed they see identical noise.
std::vector<Tensor> SmoothGradSamples(const Model& model, const Tensor& x,
                                      int c, const EstimatorConfig& cfg,
                                      std::uint64_t seed);

// The noise added to the input for draw i (0-based).
Tensor SmoothGradNoise(const Shape& shape, double sigma, std::uint64_t seed,
                       std::size_t draw);

SaliencyMap3D SmoothGrad(const Model& model, const Tensor& x, int c,
                         const EstimatorConfig& cfg, std::uint64_t seed);
SaliencyMap3D SquaredSmoothGrad(const Model& model, const Tensor& x, int c,
                                const EstimatorConfig& cfg, std::uint64_t seed);

SaliencyMap3D MeanOfDraws(std::span<const Tensor> draws, Estimator estimator,
                          int c, bool squared);

// Collapses the channel axis. `x` is required for the input-product modes.
// Integrated gradients already contain the input factor, so an input-product
// reduction of an IG map is rejected.
SaliencyMap2D Reduce(const SaliencyMap3D& map, Reduction mode,
                     const Tensor* x = nullptr);

// i.i.d. Uniform(-1, 1) scores.
SaliencyMap2D RandomSaliency(std::size_t height, std::size_t width,
                             std::uint64_t seed);

// One of the named estimator/reduction combinations (IG_sum, VG'_abs, ...).
struct EstimatorSpec {
  std::string id;       // command-line identifier, e.g. "sgp_sum"
  std::string display;  // table label, e.g. "SG'_sum"
  Estimator estimator;
  Reduction reduction;
};

const std::vector<EstimatorSpec>& EstimatorCatalog();
// Accepts the identifier or the display label; throws kConfig otherwise.
const EstimatorSpec& FindEstimator(std::string_view id);

// Computes the requested 2D maps for one input, sharing the underlying
// gradient computations between combinations of the same estimator.
std::vector<SaliencyMap2D> ComputeSaliencyMaps(
    const Model& model, const Tensor& x, int c,
    std::span<const EstimatorSpec> specs, const EstimatorConfig& cfg,
    std::uint64_t seed);

}  // namespace fpa

#endif  // FPA_SALIENCY_HPP_
