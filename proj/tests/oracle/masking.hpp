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


// Independent simulations of pixel masking: the augmentation's expected
// masked fraction and brute-force perturbation curves.
#ifndef FPA_TESTS_ORACLE_MASKING_HPP_
#define FPA_TESTS_ORACLE_MASKING_HPP_

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "fpa/augment.hpp"
#include "fpa/model.hpp"
#include "fpa/tensor.hpp"

namespace fpa::oracle {

struct MaskCount {
  double fraction = 0.0;  // pixels with every channel equal to the mask
  bool only_known_values = true;  // no partial pixels, no new values
};

// Compares an augmented K x H x W x C batch with its input. The input must not
// contain the mask value.
inline MaskCount CountMasked(const Tensor& in, const Tensor& out, float mask) {
  const std::size_t c = in.dim(3);
  const std::size_t pixels = in.size() / c;
  MaskCount r;
  std::size_t masked = 0;
  for (std::size_t p = 0; p < pixels; ++p) {
    std::size_t m = 0;
    for (std::size_t ch = 0; ch < c; ++ch) {
      const float v = out[p * c + ch];
      if (v == mask) {
        ++m;
      } else if (v != in[p * c + ch]) {
        r.only_known_values = false;
      }
    }
    if (m != 0 && m != c) r.only_known_values = false;
    if (m == c) ++masked;
  }
  r.fraction = static_cast<double>(masked) / static_cast<double>(pixels);
  return r;
}

// Monte-Carlo estimate of the expected masked fraction of the augmentation,
// simulated on a boolean grid with the standard library's generators.
inline double SimulatedMaskedFraction(const AugmentConfig& cfg, std::size_t k,
                                      std::size_t h, std::size_t w, int batches,
                                      unsigned seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> side(1, cfg.s_max);
  std::size_t masked = 0, total = 0;
  for (int b = 0; b < batches; ++b) {
    std::vector<char> mask(k * h * w, 0);
    if (u01(gen) < cfg.p) {
      const double p1 = cfg.p1_max * u01(gen);
      for (std::size_t n = 0; n < k; ++n) {
        for (std::size_t r = 0; r < h; ++r) {
          for (std::size_t c = 0; c < w; ++c) {
            if (u01(gen) < p1) mask[(n * h + r) * w + c] = 1;
            const std::size_t s = side(gen);
            if (u01(gen) < cfg.p2) {
              for (std::size_t dr = 0; dr < s && r + dr < h; ++dr) {
                for (std::size_t dc = 0; dc < s && c + dc < w; ++dc) {
                  mask[(n * h + r + dr) * w + c + dc] = 1;
                }
              }
            }
          }
        }
      }
    }
    for (char m : mask) masked += m;
    total += mask.size();
  }
  return static_cast<double>(masked) / static_cast<double>(total);
}

// Normalized logit of class c after masking floor(f * H * W) pixels in score
// order, with a fresh masked copy of x for every grid point. Ties keep the
// lower pixel index first; `least_first` reverses the whole order.
inline std::vector<double> BruteForceCurve(const Model& model, const Tensor& x,
                                           int c,
                                           const std::vector<float>& scores,
                                           bool least_first,
                                           const std::vector<double>& fractions,
                                           float mask) {
  const std::size_t hw = x.dim(0) * x.dim(1), ch = x.dim(2);
  std::vector<std::size_t> order(hw);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });
  if (least_first) std::reverse(order.begin(), order.end());
  const double base = ForwardLogits(model, x)[c];
  std::vector<double> out;
  for (double f : fractions) {
    Tensor copy = x;
    const auto n = static_cast<std::size_t>(std::floor(f * hw + 1e-9));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < ch; ++k) copy[order[i] * ch + k] = mask;
    }
    out.push_back(ForwardLogits(model, copy)[c] / base);
  }
  return out;
}

}  // namespace fpa::oracle

#endif  // FPA_TESTS_ORACLE_MASKING_HPP_
