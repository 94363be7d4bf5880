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

#ifndef FPA_AUGMENT_HPP_
#define FPA_AUGMENT_HPP_

#include <cstddef>

#include "fpa/random.hpp"
#include "fpa/tensor.hpp"

namespace fpa {

// Feature perturbation augmentation parameters. Defaults are the CIFAR-10
// setting: p = 0.5, p1_max = 0.25, p2 = 0.1, s_max = 3.
struct AugmentConfig {
  double p = 0.5;        // probability that a mini-batch is perturbed
  double p1_max = 0.25;  // per-batch pixel masking probability ~ U(0, p1_max)
  double p2 = 0.1;       // per-pixel probability of a masked square
  std::size_t s_max = 3;  // largest square side
  float mask_value = 0.0f;

  // Throws kConfig unless p, p1_max, p2 lie in [0, 1] and
  // 1 <= s_max < min(height, width).
  void Validate(std::size_t height, std::size_t width) const;
};

// Random-erasing baseline: one rectangle per selected sample.
struct RectangleConfig {
  double prob = 0.5;
  double area_min = 0.02;  // fraction of the image area
  double area_max = 0.33;
  double aspect_min = 0.3;
  double aspect_max = 3.3;
  float mask_value = 0.0f;

  void Validate() const;
};

// Applies feature perturbation augmentation to a K x H x W x C batch and
// returns the perturbed copy.
//
// With probability p the batch is selected; otherwise it is returned
// unchanged. For a selected batch p1 ~ Uniform(0, p1_max) is drawn once. Then
// for every sample and pixel (w, h), in row-major order:
//   1. with probability p1 all channels of the pixel are set to mask_value;
//   2. a side s is drawn uniformly from {1, ..., s_max};
//   3. with probability p2 the s x s square anchored at the pixel (clipped at
//      the image border) is set to mask_value.
// The square draw happens at every pixel regardless of step 1.
Tensor FpaAugmentBatch(const Tensor& batch, const AugmentConfig& cfg,
                       Rng& rng);

// For each sample, with probability `prob`, fills one rectangle of random
// area fraction and aspect ratio with mask_value. A sample whose rectangle
// does not fit after 10 attempts is left unchanged.
Tensor RectangleEraseBatch(const Tensor& batch, const RectangleConfig& cfg,
                           Rng& rng);

}  // namespace fpa

#endif  // FPA_AUGMENT_HPP_
