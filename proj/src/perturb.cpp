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

#include "fpa/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fpa/error.hpp"
#include "fpa/random.hpp"

namespace fpa {
namespace {

double Percentile(std::vector<double> sorted, double q) {
  std::sort(sorted.begin(), sorted.end());
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

std::string_view DirectionName(Direction d) {
  return d == Direction::kMif ? "MIF" : "LIF";
}

PixelRanking RankPixels(const SaliencyMap2D& map) {
  const Tensor& s = map.scores;
  for (float v : s.data()) {
    Check(std::isfinite(v), ErrorKind::kInvalidArgument,
          "rank_pixels: saliency map contains non-finite scores");
  }
  PixelRanking r;
  r.order.resize(s.size());
  std::iota(r.order.begin(), r.order.end(), std::size_t{0});
  std::stable_sort(r.order.begin(), r.order.end(),
                   [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
  r.direction = Direction::kMif;
  r.signedness = map.signedness;
  return r;
}

PixelRanking ReverseRanking(const PixelRanking& ranking) {
  PixelRanking r = ranking;
  std::reverse(r.order.begin(), r.order.end());
  r.direction =
      ranking.direction == Direction::kMif ? Direction::kLif : Direction::kMif;
  return r;
}

std::vector<double> DefaultFractionGrid(std::size_t points) {
  Check(points >= 2, ErrorKind::kConfig, "fraction grid needs >= 2 points");
  std::vector<double> f(points);
  for (std::size_t i = 0; i < points; ++i) {
    f[i] = static_cast<double>(i) / static_cast<double>(points - 1);
  }
  return f;
}

void ValidateFractionGrid(std::span<const double> fractions) {
  Check(!fractions.empty() && fractions.front() == 0.0, ErrorKind::kConfig,
        "fraction grid must start at 0");
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    Check(fractions[i] >= 0.0 && fractions[i] <= 1.0, ErrorKind::kConfig,
          "fraction grid values must lie in [0, 1]");
    if (i > 0) {
      Check(fractions[i] > fractions[i - 1], ErrorKind::kConfig,
            "fraction grid must be strictly increasing");
    }
  }
}

std::vector<std::size_t> MaskedCounts(std::span<const double> fractions,
                                      std::size_t num_pixels) {
  std::vector<std::size_t> counts;
  counts.reserve(fractions.size());
  for (double f : fractions) {
    // The epsilon keeps grid points such as 0.58 * 100 from rounding down.
    const double exact = f * static_cast<double>(num_pixels);
    counts.push_back(std::min(
        num_pixels, static_cast<std::size_t>(std::floor(exact + 1e-9))));
  }
  return counts;
}

SampleCurve ComputeSampleCurve(const Model& model, const Tensor& x, int c,
                               const PixelRanking& ranking,
                               std::span<const double> fractions,
                               float mask_value) {
  ValidateFractionGrid(fractions);
  Check(x.rank() == 3, ErrorKind::kShape, "perturbation expects H x W x C");
  const std::size_t pixels = x.dim(0) * x.dim(1);
  const std::size_t channels = x.dim(2);
  Check(ranking.order.size() == pixels, ErrorKind::kShape,
        "ranking covers " + std::to_string(ranking.order.size()) +
            " pixels, image has " + std::to_string(pixels));
  const std::vector<std::size_t> counts = MaskedCounts(fractions, pixels);

  // Masking is nested: one working copy advances along the ranking and is
  // snapshotted at every grid point.
  Shape batch_shape{fractions.size()};
  batch_shape.insert(batch_shape.end(), x.shape().begin(), x.shape().end());
  Tensor batch(batch_shape);
  Tensor work = x;
  std::size_t masked = 0;
  for (std::size_t k = 0; k < fractions.size(); ++k) {
    for (; masked < counts[k]; ++masked) {
      const std::size_t p = ranking.order[masked];
      for (std::size_t ch = 0; ch < channels; ++ch) {
        work[p * channels + ch] = mask_value;
      }
    }
    std::copy(work.vector().begin(), work.vector().end(),
              batch.data().begin() + k * x.size());
  }

  const Tensor logits = ForwardLogits(model, batch);
  const std::size_t classes = model.num_classes();
  Check(c >= 0 && static_cast<std::size_t>(c) < classes,
        ErrorKind::kInvalidArgument, "class index out of range");
  SampleCurve curve;
  // Fraction 0 masks nothing, so row 0 is the unperturbed input.
  curve.base_logit = logits[c];
  curve.excluded = std::abs(curve.base_logit) < kMinBaseLogit;
  curve.values.resize(fractions.size());
  for (std::size_t k = 0; k < fractions.size(); ++k) {
    const double v = logits[k * classes + c];
    curve.values[k] = curve.excluded ? 0.0 : v / curve.base_logit;
  }
  return curve;
}

PerturbationCurve AggregateCurves(std::span<const double> fractions,
                                  std::span<const SampleCurve> samples) {
  Check(!samples.empty(), ErrorKind::kInvalidArgument,
        "aggregate_curves: no samples");
  PerturbationCurve out;
  out.fractions.assign(fractions.begin(), fractions.end());
  out.mean.assign(fractions.size(), 0.0);
  for (const SampleCurve& s : samples) {
    Check(s.values.size() == fractions.size(), ErrorKind::kInvalidArgument,
          "aggregate_curves: sample curve does not match the fraction grid");
    if (s.excluded) {
      ++out.excluded;
      continue;
    }
    out.per_sample.push_back(s.values);
  }
  Check(!out.per_sample.empty(), ErrorKind::kData,
        "aggregate_curves: every sample was excluded (near-zero logit)");
  for (const auto& row : out.per_sample) {
    for (std::size_t k = 0; k < row.size(); ++k) out.mean[k] += row[k];
  }
  for (double& v : out.mean) v /= static_cast<double>(out.per_sample.size());
  return out;
}

double TrapezoidArea(std::span<const double> fractions,
                     std::span<const double> values) {
  Check(fractions.size() == values.size(), ErrorKind::kInvalidArgument,
        "trapezoid: grid and values differ in length");
  double area = 0.0;
  for (std::size_t k = 1; k < fractions.size(); ++k) {
    const double dx = 100.0 * (fractions[k] - fractions[k - 1]);
    area += 0.5 * dx * (values[k] + values[k - 1]);
  }
  return area;
}

double FidelityArea(const PerturbationCurve& lif, const PerturbationCurve& mif) {
  Check(lif.fractions == mif.fractions && lif.mean.size() == mif.mean.size(),
        ErrorKind::kInvalidArgument,
        "fidelity_area: LIF and MIF curves use different fraction grids");
  std::vector<double> diff(lif.mean.size());
  for (std::size_t k = 0; k < diff.size(); ++k) {
    diff[k] = lif.mean[k] - mif.mean[k];
  }
  return TrapezoidArea(lif.fractions, diff);
}

FidelityResult BootstrapCi(const PerturbationCurve& lif,
                           const PerturbationCurve& mif,
                           std::size_t resamples, std::uint64_t seed) {
  Check(lif.fractions == mif.fractions, ErrorKind::kInvalidArgument,
        "bootstrap: LIF and MIF curves use different fraction grids");
  Check(lif.per_sample.size() == mif.per_sample.size(),
        ErrorKind::kInvalidArgument,
        "bootstrap: LIF and MIF curves are not paired per sample");
  const std::size_t n = lif.per_sample.size();
  Check(n >= 2, ErrorKind::kInvalidArgument,
        "bootstrap needs at least 2 samples, got " + std::to_string(n));
  Check(resamples >= 1, ErrorKind::kInvalidArgument,
        "bootstrap needs at least one resample");

  FidelityResult r;
  r.area = FidelityArea(lif, mif);
  r.num_samples = n;
  r.excluded = lif.excluded;
  r.bootstrap_resamples = resamples;
  r.seed = seed;

  const std::size_t points = lif.fractions.size();
  std::vector<double> areas(resamples);
  std::vector<double> lif_mean(points), mif_mean(points), diff(points);
  for (std::size_t b = 0; b < resamples; ++b) {
    Rng rng(DeriveSeed(seed, b));
    std::fill(lif_mean.begin(), lif_mean.end(), 0.0);
    std::fill(mif_mean.begin(), mif_mean.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto j = static_cast<std::size_t>(
          UniformInt(rng, 0, static_cast<std::int64_t>(n) - 1));
      for (std::size_t k = 0; k < points; ++k) {
        lif_mean[k] += lif.per_sample[j][k];
        mif_mean[k] += mif.per_sample[j][k];
      }
    }
    for (std::size_t k = 0; k < points; ++k) {
      diff[k] = lif_mean[k] / static_cast<double>(n) -
                mif_mean[k] / static_cast<double>(n);
    }
    areas[b] = TrapezoidArea(lif.fractions, diff);
  }
  r.ci_low = std::min(r.area, Percentile(areas, 0.025));
  r.ci_high = std::max(r.area, Percentile(areas, 0.975));
  return r;
}

std::vector<float> RankedScoreSeries(const SaliencyMap2D& map,
                                     const PixelRanking& ranking) {
  Check(ranking.order.size() == map.scores.size(), ErrorKind::kShape,
        "ranked_score_series: ranking does not match the map");
  std::vector<float> series;
  series.reserve(ranking.order.size());
  for (std::size_t p : ranking.order) series.push_back(map.scores[p]);
  return series;
}

}  // namespace fpa
