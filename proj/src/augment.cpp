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

#include "fpa/augment.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fpa/error.hpp"

namespace fpa {
namespace {

void CheckUnit(double v, const char* name) {
  Check(v >= 0.0 && v <= 1.0, ErrorKind::kConfig,
        std::string("augmentation: ") + name + " must lie in [0, 1], got " +
            std::to_string(v));
}

void CheckBatch(const Tensor& batch) {
  Check(batch.rank() == 4, ErrorKind::kShape,
        "augmentation expects K x H x W x C, got " +
            ShapeToString(batch.shape()));
}

void MaskPixel(Tensor& t, std::size_t offset, std::size_t channels,
               float value) {
  for (std::size_t c = 0; c < channels; ++c) t[offset + c] = value;
}

}  // namespace

void AugmentConfig::Validate(std::size_t height, std::size_t width) const {
  CheckUnit(p, "p");
  CheckUnit(p1_max, "p1_max");
  CheckUnit(p2, "p2");
  Check(s_max >= 1 && s_max < std::min(height, width), ErrorKind::kConfig,
        "augmentation: s_max must satisfy 1 <= s_max < min(H, W), got " +
            std::to_string(s_max));
}

void RectangleConfig::Validate() const {
  CheckUnit(prob, "prob");
  Check(area_min > 0.0 && area_min <= area_max && area_max < 1.0,
        ErrorKind::kConfig, "rectangle: area range must lie inside (0, 1)");
  Check(aspect_min > 0.0 && aspect_min <= aspect_max, ErrorKind::kConfig,
        "rectangle: aspect range must be positive and ordered");
}

Tensor FpaAugmentBatch(const Tensor& batch, const AugmentConfig& cfg,
                       Rng& rng) {
  CheckBatch(batch);
  const std::size_t k = batch.dim(0), h = batch.dim(1), w = batch.dim(2),
                    c = batch.dim(3);
  cfg.Validate(h, w);
  Tensor out = batch;
  if (!Bernoulli(rng, cfg.p)) return out;

  const double p1 = UniformRange(rng, 0.0, cfg.p1_max);
  const auto s_max = static_cast<std::int64_t>(cfg.s_max);
  for (std::size_t n = 0; n < k; ++n) {
    const std::size_t base = n * h * w * c;
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        if (Bernoulli(rng, p1)) {
          MaskPixel(out, base + (y * w + x) * c, c, cfg.mask_value);
        }
        const auto side = static_cast<std::size_t>(UniformInt(rng, 1, s_max));
        if (Bernoulli(rng, cfg.p2)) {
          const std::size_t y_end = std::min(h, y + side);
          const std::size_t x_end = std::min(w, x + side);
          for (std::size_t yy = y; yy < y_end; ++yy) {
            for (std::size_t xx = x; xx < x_end; ++xx) {
              MaskPixel(out, base + (yy * w + xx) * c, c, cfg.mask_value);
            }
          }
        }
      }
    }
  }
  return out;
}

Tensor RectangleEraseBatch(const Tensor& batch, const RectangleConfig& cfg,
                           Rng& rng) {
  CheckBatch(batch);
  cfg.Validate();
  const std::size_t k = batch.dim(0), h = batch.dim(1), w = batch.dim(2),
                    c = batch.dim(3);
  const double area = static_cast<double>(h * w);
  Tensor out = batch;
  for (std::size_t n = 0; n < k; ++n) {
    if (!Bernoulli(rng, cfg.prob)) continue;
    for (int attempt = 0; attempt < 10; ++attempt) {
      const double target = UniformRange(rng, cfg.area_min, cfg.area_max) * area;
      const double aspect = UniformRange(rng, cfg.aspect_min, cfg.aspect_max);
      const auto rh = static_cast<std::size_t>(std::lround(std::sqrt(target * aspect)));
      const auto rw = static_cast<std::size_t>(std::lround(std::sqrt(target / aspect)));
      if (rh < 1 || rw < 1 || rh > h || rw > w) continue;
      const auto top = static_cast<std::size_t>(
          UniformInt(rng, 0, static_cast<std::int64_t>(h - rh)));
      const auto left = static_cast<std::size_t>(
          UniformInt(rng, 0, static_cast<std::int64_t>(w - rw)));
      const std::size_t base = n * h * w * c;
      for (std::size_t y = top; y < top + rh; ++y) {
        for (std::size_t x = left; x < left + rw; ++x) {
          MaskPixel(out, base + (y * w + x) * c, c, cfg.mask_value);
        }
      }
      break;
    }
  }
  return out;
}

}  // namespace fpa
